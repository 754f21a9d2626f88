#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "prunekit/rng.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

// Synthetic labelled point cloud; regenerable bit-for-bit from its seed.
struct Dataset {
  Tensor inputs;            // [N, dims]
  std::vector<int> labels;  // size N
  int classes = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  int dims() const { return inputs.shape[1]; }
};

// Center of class k: unit vector along axis (k mod dims), scaled up one unit
// each time the axes wrap around. Consecutive classes are unit-separated.
inline std::vector<double> blob_center(int k, int dims) {
  std::vector<double> c(dims, 0.0);
  c[k % dims] = 1.0 + k / dims;
  return c;
}

// Gaussian clusters at deterministic centers, deterministically shuffled.
inline Dataset make_blobs(int classes, int dims, int per_class, double spread,
                          std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("make_blobs: need at least two classes");
  if (dims <= 0 || per_class <= 0)
    throw std::invalid_argument("make_blobs: dims and per-class count must be positive");
  if (spread < 0.0) throw std::invalid_argument("make_blobs: spread must be nonnegative");
  const int n = classes * per_class;
  Dataset ds;
  ds.classes = classes;
  ds.seed = seed;
  ds.inputs = Tensor({n, dims});
  ds.labels.resize(n);

  Rng draw(mix_seed(seed, 0));
  for (int k = 0; k < classes; ++k) {
    const std::vector<double> center = blob_center(k, dims);
    for (int s = 0; s < per_class; ++s) {
      const int row = k * per_class + s;
      ds.labels[row] = k;
      for (int d = 0; d < dims; ++d)
        ds.inputs.data[static_cast<std::size_t>(row) * dims + d] =
            center[d] + spread * draw.normal();
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffler(mix_seed(seed, 1));
  shuffler.shuffle(order);
  Tensor shuffled({n, dims});
  std::vector<int> shuffled_labels(n);
  for (int row = 0; row < n; ++row) {
    shuffled_labels[row] = ds.labels[order[row]];
    for (int d = 0; d < dims; ++d)
      shuffled.data[static_cast<std::size_t>(row) * dims + d] =
          ds.inputs.data[static_cast<std::size_t>(order[row]) * dims + d];
  }
  ds.inputs = std::move(shuffled);
  ds.labels = std::move(shuffled_labels);
  return ds;
}

// Rows of the dataset gathered into a batch shaped [B] + sample_shape.
// sample_shape must have the same element count as a dataset row (a CNN views
// each row as C*H*W).
inline Tensor gather_inputs(const Dataset& ds, const std::vector<int>& rows,
                            const std::vector<int>& sample_shape) {
  const int dims = ds.dims();
  std::size_t per = 1;
  for (int e : sample_shape) per *= static_cast<std::size_t>(e);
  if (per != static_cast<std::size_t>(dims))
    throw std::invalid_argument("gather_inputs: sample shape does not match row width");
  std::vector<int> shape = {static_cast<int>(rows.size())};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Tensor out(shape);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b] < 0 || rows[b] >= static_cast<int>(ds.size()))
      throw std::invalid_argument("gather_inputs: row index out of range");
    for (int d = 0; d < dims; ++d)
      out.data[b * dims + d] = ds.inputs.data[static_cast<std::size_t>(rows[b]) * dims + d];
  }
  return out;
}

inline std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& rows) {
  std::vector<int> out(rows.size());
  for (std::size_t b = 0; b < rows.size(); ++b) out[b] = ds.labels[rows[b]];
  return out;
}

struct Split {
  std::vector<int> train;
  std::vector<int> eval;
};

// Deterministic held-out split: seeded permutation, last fraction held out.
inline Split split_dataset(const Dataset& ds, double eval_fraction, std::uint64_t seed) {
  if (eval_fraction < 0.0 || eval_fraction >= 1.0)
    throw std::invalid_argument("split_dataset: eval fraction must be in [0,1)");
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 2));
  rng.shuffle(order);
  const std::size_t eval_n = static_cast<std::size_t>(eval_fraction * ds.size());
  Split s;
  s.train.assign(order.begin(), order.end() - eval_n);
  s.eval.assign(order.end() - eval_n, order.end());
  return s;
}

// Fixed class-balanced scoring subset: `per_class` rows of each class, chosen
// by seeded draw from the given candidate rows. All importance measures score
// on this one batch so comparisons see identical data.
inline std::vector<int> scoring_batch(const Dataset& ds, const std::vector<int>& candidates,
                                      int per_class, std::uint64_t seed) {
  if (per_class <= 0) throw std::invalid_argument("scoring_batch: per-class count must be positive");
  std::vector<std::vector<int>> byclass(ds.classes);
  for (int row : candidates) byclass[ds.labels[row]].push_back(row);
  Rng rng(mix_seed(seed, 3));
  std::vector<int> out;
  for (int k = 0; k < ds.classes; ++k) {
    auto& rows = byclass[k];
    if (rows.empty())
      throw std::invalid_argument("scoring_batch: class " + std::to_string(k) +
                                  " has no candidate rows");
    rng.shuffle(rows);
    for (int i = 0; i < per_class; ++i) out.push_back(rows[i % rows.size()]);
  }
  return out;
}

}  // namespace prunekit
