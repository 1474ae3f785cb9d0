// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "mdbpe/binary_io.hpp"
#include "mdbpe/error.hpp"

namespace mdbpe {

using json = nlohmann::json;

Codebook::Codebook(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw Error(ErrorCategory::kInvalidArgument, "codebook dim must be > 0");
  if (data_.size() % dim_ != 0) {
    throw Error(ErrorCategory::kInvalidArgument, "codebook data is not a multiple of dim");
  }
  for (double x : data_) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCategory::kInvalidArgument, "codebook has non-finite entries");
    }
  }
}

Codebook Codebook::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error(ErrorCategory::kInvalidArgument, "empty codebook");
  std::vector<double> data;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) {
      throw Error(ErrorCategory::kInvalidArgument, "codebook rows differ in length");
    }
    data.insert(data.end(), r.begin(), r.end());
  }
  return Codebook(rows.front().size(), std::move(data));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> farthest_point_sample(const Codebook& codebook, std::size_t k) {
  const std::size_t n = codebook.size();
  if (k < 1 || k > n) {
    throw Error(ErrorCategory::kOutOfRange,
                "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<double> mean(codebook.dim(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = codebook.row(i);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += r[d];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<std::size_t> seeds;
  std::vector<double> nearest(n);
  std::vector<bool> chosen(n, false);
  std::size_t first = 0;
  for (std::size_t i = 0; i < n; ++i) {
    nearest[i] = squared_distance(codebook.row(i), mean);
    if (nearest[i] > nearest[first]) first = i;
  }
  seeds.push_back(first);
  chosen[first] = true;
  for (std::size_t i = 0; i < n; ++i) {
    nearest[i] = squared_distance(codebook.row(i), codebook.row(first));
  }
  while (seeds.size() < k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      if (best == n || nearest[i] > nearest[best]) best = i;
    }
    seeds.push_back(best);
    chosen[best] = true;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(codebook.row(i), codebook.row(best)));
    }
  }
  return seeds;
}

namespace {

std::size_t nearest_center(std::span<const double> v,
                           const std::vector<std::vector<double>>& centers,
                           double* distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = squared_distance(v, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (distance != nullptr) *distance = best_d;
  return best;
}

double assign_all(const Codebook& codebook, const std::vector<std::vector<double>>& centers,
                  std::vector<std::size_t>& labels) {
  double objective = 0.0;
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    double d = 0.0;
    labels[i] = nearest_center(codebook.row(i), centers, &d);
    objective += d;
  }
  return objective;
}

}  // namespace

KMeansResult kmeans_refine(const Codebook& codebook, std::span<const std::size_t> seeds,
                           std::size_t max_iters, double tol) {
  KMeansResult result;
  for (std::size_t s : seeds) {
    if (s >= codebook.size()) throw Error(ErrorCategory::kOutOfRange, "seed index out of range");
    const auto r = codebook.row(s);
    result.centers.emplace_back(r.begin(), r.end());
  }
  if (result.centers.empty()) return result;

  std::vector<std::size_t> labels(codebook.size());
  result.objective.push_back(assign_all(codebook, result.centers, labels));
  const std::size_t dim = codebook.dim();
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    std::vector<std::vector<double>> sums(result.centers.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> members(result.centers.size(), 0);
    for (std::size_t i = 0; i < codebook.size(); ++i) {
      const auto r = codebook.row(i);
      for (std::size_t d = 0; d < dim; ++d) sums[labels[i]][d] += r[d];
      ++members[labels[i]];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < result.centers.size(); ++c) {
      if (members[c] == 0) continue;
      for (double& s : sums[c]) s /= static_cast<double>(members[c]);
      max_shift = std::max(max_shift, std::sqrt(squared_distance(sums[c], result.centers[c])));
      result.centers[c] = std::move(sums[c]);
    }
    ++result.iterations;
    result.objective.push_back(assign_all(codebook, result.centers, labels));
    if (max_shift < tol) break;
  }
  return result;
}

CollapseMap make_collapse_map(const Codebook& codebook,
                              std::vector<std::vector<double>> centers) {
  if (centers.empty()) throw Error(ErrorCategory::kInvalidArgument, "no centers");
  CollapseMap map;
  map.k = centers.size();
  map.centers = std::move(centers);
  map.assign.resize(codebook.size());
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    map.assign[i] = static_cast<TokenClass>(nearest_center(codebook.row(i), map.centers));
  }
  return map;
}

CollapseMap collapse_codebook(const Codebook& codebook, std::size_t k, std::size_t max_iters,
                              double tol) {
  const auto seeds = farthest_point_sample(codebook, k);
  auto km = kmeans_refine(codebook, seeds, max_iters, tol);
  return make_collapse_map(codebook, std::move(km.centers));
}

std::vector<TokenGrid> snap(std::span<const TokenGrid> corpus, const CollapseMap& map) {
  std::vector<TokenGrid> out;
  out.reserve(corpus.size());
  std::vector<TokenClass> classes;
  for (const auto& g : corpus) {
    classes.assign(g.classes().begin(), g.classes().end());
    for (auto& c : classes) {
      if (c >= map.assign.size()) {
        throw Error(ErrorCategory::kOutOfRange,
                    "class " + std::to_string(c) + " has no collapse assignment");
      }
      c = map.assign[c];
    }
    out.push_back(TokenGrid::from_classes(g.dims(), classes, static_cast<TokenClass>(map.k)));
  }
  return out;
}

std::vector<std::size_t> prune_indices(std::span<const std::size_t> lengths, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCategory::kInvalidArgument, "prune fraction must be in [0, 1)");
  }
  const std::size_t n = lengths.size();
  // The epsilon keeps products like 0.05 * 100 from rounding up to 6.
  const auto drop = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lengths[a] != lengths[b] ? lengths[a] > lengths[b] : a > b;
  });
  std::vector<bool> dropped(n, false);
  for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) kept.push_back(i);
  }
  return kept;
}

std::vector<CompressedSequence> prune(std::span<const CompressedSequence> seqs,
                                      double fraction) {
  std::vector<std::size_t> lengths;
  lengths.reserve(seqs.size());
  for (const auto& s : seqs) lengths.push_back(s.tokens.size());
  std::vector<CompressedSequence> out;
  for (std::size_t i : prune_indices(lengths, fraction)) out.push_back(seqs[i]);
  return out;
}

std::string write_codebook(const Codebook& codebook) {
  ByteWriter out;
  out.magic("MDCB");
  out.u8(0x01);
  out.u32(static_cast<std::uint32_t>(codebook.size()));
  out.u32(static_cast<std::uint32_t>(codebook.dim()));
  for (double x : codebook.data()) out.f32(static_cast<float>(x));
  return std::move(out).bytes();
}

Codebook read_codebook(std::string_view bytes) {
  ByteReader in(bytes);
  in.expect_magic("MDCB");
  if (in.u8() != 0x01) throw Error(ErrorCategory::kFormat, "unsupported codebook version");
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  if (dim == 0) throw Error(ErrorCategory::kFormat, "codebook dim is zero");
  if (in.remaining() / 4 / dim < count) throw Error(ErrorCategory::kFormat, "codebook truncated");
  std::vector<double> data(static_cast<std::size_t>(count) * dim);
  for (auto& x : data) x = in.f32();
  in.expect_done();
  try {
    return Codebook(dim, std::move(data));
  } catch (const Error& e) {
    throw Error(ErrorCategory::kFormat, e.what());
  }
}

std::string write_collapse_map(const CollapseMap& map) {
  json doc = {{"k", map.k}, {"assign", map.assign}, {"centers", map.centers}};
  return doc.dump() + "\n";
}

CollapseMap read_collapse_map(std::string_view document) {
  try {
    const json doc = json::parse(document);
    CollapseMap map;
    map.k = doc.at("k").get<std::size_t>();
    map.assign = doc.at("assign").get<std::vector<TokenClass>>();
    map.centers = doc.at("centers").get<std::vector<std::vector<double>>>();
    if (map.centers.size() != map.k) {
      throw Error(ErrorCategory::kFormat, "collapse map: centers.size() != k");
    }
    for (TokenClass a : map.assign) {
      if (a >= map.k) throw Error(ErrorCategory::kFormat, "collapse map: assignment >= k");
    }
    return map;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kFormat, std::string("collapse map: ") + e.what());
  }
}

}  // namespace mdbpe
