// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdbpe/codec.hpp"
#include "mdbpe/grid.hpp"

namespace mdbpe {

// Embedding vectors indexed by token class, stored row-major.
class Codebook {
 public:
  Codebook() = default;
  Codebook(std::size_t dim, std::vector<double> data);
  static Codebook from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct CollapseMap {
  std::size_t k = 0;
  std::vector<std::vector<double>> centers;
  // Original class -> index of the nearest center.
  std::vector<TokenClass> assign;

  friend bool operator==(const CollapseMap&, const CollapseMap&) = default;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

// First seed is farthest from the codebook mean, then each next seed
// maximizes the distance to its nearest chosen seed. Ties go to the lowest
// index.
std::vector<std::size_t> farthest_point_sample(const Codebook& codebook, std::size_t k);

struct KMeansResult {
  std::vector<std::vector<double>> centers;
  // Sum of squared distances to the nearest center: entry 0 for the seeds,
  // then one entry after every Lloyd update.
  std::vector<double> objective;
  std::size_t iterations = 0;
};

// Lloyd iterations from the seed vectors until the largest center move is
// below `tol` or `max_iters` updates ran. Empty clusters keep their center.
KMeansResult kmeans_refine(const Codebook& codebook, std::span<const std::size_t> seeds,
                           std::size_t max_iters = 100, double tol = 1e-6);

// Nearest center for every codebook row, ties to the lowest center index.
CollapseMap make_collapse_map(const Codebook& codebook,
                              std::vector<std::vector<double>> centers);

// farthest_point_sample + kmeans_refine + make_collapse_map.
CollapseMap collapse_codebook(const Codebook& codebook, std::size_t k,
                              std::size_t max_iters = 100, double tol = 1e-6);

// Replaces every class by its collapsed class; results are single-cell
// instance grids over a vocabulary of map.k classes.
std::vector<TokenGrid> snap(std::span<const TokenGrid> corpus, const CollapseMap& map);

// Indices kept after dropping ceil(fraction * N) of the longest entries
// (ties drop later indices first), in original order.
std::vector<std::size_t> prune_indices(std::span<const std::size_t> lengths,
                                       double fraction);
std::vector<CompressedSequence> prune(std::span<const CompressedSequence> seqs,
                                      double fraction);

// MDCB codebook container and the CollapseMap JSON document.
std::string write_codebook(const Codebook& codebook);
Codebook read_codebook(std::string_view bytes);
std::string write_collapse_map(const CollapseMap& map);
CollapseMap read_collapse_map(std::string_view document);

}  // namespace mdbpe
