#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prunekit/csv.hpp"
#include "prunekit/importance.hpp"
#include "prunekit/model.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

// Pruning schedule: the total target fraction reached in equal cumulative
// steps over the given number of rounds.
struct Schedule {
  double target = 0.0;
  int rounds = 1;
  std::vector<double> cumulative;
};

inline Schedule make_schedule(double target, int rounds) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("make_schedule: target fraction must be in (0,1)");
  if (rounds < 1) throw std::invalid_argument("make_schedule: need at least one round");
  Schedule s;
  s.target = target;
  s.rounds = rounds;
  for (int k = 1; k <= rounds; ++k) s.cumulative.push_back(target * k / rounds);
  return s;
}

struct MaskEntry {
  int layer = 0;
  int group = 0;
  bool kept = true;
};

// Keep/prune flag per group, in canonical group order (layers ascending,
// groups ascending within a layer).
struct Mask {
  Granularity granularity = Granularity::kStructured;
  std::vector<MaskEntry> entries;

  std::size_t pruned_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.kept ? 0 : 1;
    return n;
  }
  double pruned_fraction() const {
    return entries.empty() ? 0.0 : static_cast<double>(pruned_count()) / entries.size();
  }

  std::string to_csv() const {
    std::string out = "layer,group,kept\n";
    for (const auto& e : entries) out += csv_row(e.layer, e.group, e.kept ? 1 : 0);
    return out;
  }
};

struct MaskBuild {
  Mask mask;
  std::vector<int> floor_limited_layers;  // layers where the keep floor blocked pruning
};

namespace detail {

inline void require_same_universe(const std::vector<MaskEntry>& a,
                                  const std::vector<MaskEntry>& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": group count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].layer != b[i].layer || a[i].group != b[i].group)
      throw std::invalid_argument(std::string(what) + ": group identity mismatch");
}

}  // namespace detail

// Globally rank kept groups by ascending score and prune the lowest until
// round(cumulative_target * total) groups are pruned, never dropping a layer
// below `keep_floor` kept groups (blocked pruning spills to the next-lowest
// score elsewhere). Ties break by (layer, group).
inline MaskBuild build_mask(const ImportanceReport& report, double cumulative_target,
                            const Mask* prior, int keep_floor,
                            Granularity granularity = Granularity::kStructured) {
  if (report.rows.empty()) throw std::invalid_argument("build_mask: empty report");
  if (cumulative_target < 0.0 || cumulative_target >= 1.0)
    throw std::invalid_argument("build_mask: cumulative target must be in [0,1)");
  if (keep_floor < 0) throw std::invalid_argument("build_mask: keep floor must be nonnegative");

  MaskBuild out;
  Mask& mask = out.mask;
  mask.granularity = granularity;
  mask.entries.reserve(report.rows.size());
  for (const auto& r : report.rows) mask.entries.push_back({r.layer, r.group, true});

  int max_layer = 0;
  for (const auto& e : mask.entries) max_layer = std::max(max_layer, e.layer);
  std::vector<int> kept_per_layer(max_layer + 1, 0);
  for (const auto& e : mask.entries) kept_per_layer[e.layer]++;

  std::size_t already_pruned = 0;
  if (prior) {
    detail::require_same_universe(mask.entries, prior->entries, "build_mask");
    for (std::size_t i = 0; i < prior->entries.size(); ++i)
      if (!prior->entries[i].kept) {
        mask.entries[i].kept = false;
        kept_per_layer[mask.entries[i].layer]--;
        already_pruned++;
      }
    // Tolerate schedule rounding: a chained prior can sit up to half a group
    // above the raw fraction. Anything further below is a caller error.
    if (static_cast<std::size_t>(
            std::lround(cumulative_target * static_cast<double>(mask.entries.size()))) <
        already_pruned)
      throw std::invalid_argument("build_mask: target below the fraction already pruned");
  }

  const std::size_t want =
      std::max(already_pruned,
               static_cast<std::size_t>(std::lround(cumulative_target * mask.entries.size())));

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < mask.entries.size(); ++i)
    if (mask.entries[i].kept) candidates.push_back(i);
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = report.rows[a];
    const auto& rb = report.rows[b];
    if (ra.score != rb.score) return ra.score < rb.score;
    if (ra.layer != rb.layer) return ra.layer < rb.layer;
    return ra.group < rb.group;
  });

  std::size_t pruned = already_pruned;
  std::vector<bool> floor_hit(max_layer + 1, false);
  for (std::size_t idx : candidates) {
    if (pruned >= want) break;
    int layer = mask.entries[idx].layer;
    if (kept_per_layer[layer] - 1 < keep_floor) {
      floor_hit[layer] = true;
      continue;
    }
    mask.entries[idx].kept = false;
    kept_per_layer[layer]--;
    pruned++;
  }
  for (int l = 0; l <= max_layer; ++l)
    if (floor_hit[l]) out.floor_limited_layers.push_back(l);
  return out;
}

// Zero out every parameter belonging to a pruned group.
inline void apply_mask(Network& net, const Mask& mask) {
  auto groups = prune_groups(net, mask.granularity);
  if (groups.size() != mask.entries.size())
    throw std::invalid_argument("apply_mask: mask does not match network grouping");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].layer != mask.entries[i].layer || groups[i].group != mask.entries[i].group)
      throw std::invalid_argument("apply_mask: mask does not match network grouping");
    if (!mask.entries[i].kept)
      for (auto [part, off] : groups[i].indices) net.params.parts[part].data[off] = 0.0;
  }
}

// 1.0 where the parameter is trainable, 0.0 where its group is pruned.
inline GradientVector keep_vector(const Network& net, const Mask& mask) {
  GradientVector keep = GradientVector::zeros_like(net.params);
  for (auto& part : keep.parts) part.fill(1.0);
  auto groups = prune_groups(net, mask.granularity);
  if (groups.size() != mask.entries.size())
    throw std::invalid_argument("keep_vector: mask does not match network grouping");
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (!mask.entries[i].kept)
      for (auto [part, off] : groups[i].indices) keep.parts[part].data[off] = 0.0;
  return keep;
}

// Hamming distance over the group keep flags.
inline std::size_t mask_distance(const Mask& a, const Mask& b) {
  detail::require_same_universe(a.entries, b.entries, "mask_distance");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    d += a.entries[i].kept != b.entries[i].kept ? 1 : 0;
  return d;
}

// Pruned fraction per layer, indexed by layer id.
inline std::vector<double> layerwise_ratios(const Mask& mask) {
  int max_layer = 0;
  for (const auto& e : mask.entries) max_layer = std::max(max_layer, e.layer);
  std::vector<double> pruned(max_layer + 1, 0.0), total(max_layer + 1, 0.0);
  for (const auto& e : mask.entries) {
    total[e.layer] += 1.0;
    pruned[e.layer] += e.kept ? 0.0 : 1.0;
  }
  std::vector<double> out(max_layer + 1, 0.0);
  for (int l = 0; l <= max_layer; ++l) out[l] = total[l] > 0.0 ? pruned[l] / total[l] : 0.0;
  return out;
}

// Remove round(target * groups) groups from every layer, chosen uniformly at
// random; layers that would fall below the keep floor are clamped and
// reported.
inline MaskBuild uniform_mask(const Network& net, double target, std::uint64_t seed,
                              Granularity granularity = Granularity::kStructured,
                              const Mask* prior = nullptr, int keep_floor = 1) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("uniform_mask: target must be in (0,1)");
  auto groups = prune_groups(net, granularity);
  MaskBuild out;
  Mask& mask = out.mask;
  mask.granularity = granularity;
  for (const auto& g : groups) mask.entries.push_back({g.layer, g.group, true});
  if (prior) {
    detail::require_same_universe(mask.entries, prior->entries, "uniform_mask");
    for (std::size_t i = 0; i < prior->entries.size(); ++i)
      mask.entries[i].kept = prior->entries[i].kept;
  }

  const int layers = static_cast<int>(net.layers.size());
  Rng rng(mix_seed(seed, 5));
  for (int l = 0; l < layers; ++l) {
    std::vector<std::size_t> kept_idx;
    int total = 0, pruned_now = 0;
    for (std::size_t i = 0; i < mask.entries.size(); ++i)
      if (mask.entries[i].layer == l) {
        total++;
        if (mask.entries[i].kept) kept_idx.push_back(i);
        else pruned_now++;
      }
    int want = static_cast<int>(std::lround(target * total));
    const int cap = std::max(0, total - keep_floor);
    if (want > cap) {
      want = cap;
      out.floor_limited_layers.push_back(l);
    }
    int extra = want - pruned_now;
    if (extra <= 0) continue;
    rng.shuffle(kept_idx);
    for (int k = 0; k < extra; ++k) mask.entries[kept_idx[k]].kept = false;
  }
  return out;
}

// Bitset file: one JSON header line (granularity + per-layer group counts),
// then the keep flags packed eight per byte, least significant bit first.
inline void write_mask_bits(const std::string& path, const Mask& mask) {
  int max_layer = 0;
  for (const auto& e : mask.entries) max_layer = std::max(max_layer, e.layer);
  std::vector<int> counts(mask.entries.empty() ? 0 : max_layer + 1, 0);
  for (const auto& e : mask.entries) counts[e.layer]++;
  nlohmann::json header;
  header["format"] = "prunekit-mask-v1";
  header["granularity"] = to_string(mask.granularity);
  header["layer_group_counts"] = counts;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open mask file for writing: " + path);
  out << header.dump() << '\n';
  unsigned char byte = 0;
  int nbits = 0;
  for (const auto& e : mask.entries) {
    if (e.kept) byte |= static_cast<unsigned char>(1u << nbits);
    if (++nbits == 8) {
      out.put(static_cast<char>(byte));
      byte = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) out.put(static_cast<char>(byte));
  if (!out) throw std::runtime_error("mask write failed: " + path);
}

inline Mask read_mask_bits(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mask file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("mask header missing: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "prunekit-mask-v1")
    throw std::runtime_error("unrecognized mask format in " + path);
  Mask mask;
  mask.granularity = granularity_from_string(header.at("granularity").get<std::string>());
  const auto counts = header.at("layer_group_counts").get<std::vector<int>>();
  std::size_t total = 0;
  for (int c : counts) total += static_cast<std::size_t>(c);
  std::string bytes((total + 7) / 8, '\0');
  if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("mask payload truncated: " + path);
  std::size_t bit = 0;
  for (int layer = 0; layer < static_cast<int>(counts.size()); ++layer)
    for (int g = 0; g < counts[layer]; ++g, ++bit) {
      bool kept = (static_cast<unsigned char>(bytes[bit / 8]) >> (bit % 8)) & 1u;
      mask.entries.push_back({layer, g, kept});
    }
  return mask;
}

}  // namespace prunekit
