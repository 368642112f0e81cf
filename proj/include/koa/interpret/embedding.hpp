#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "koa/common/image.hpp"
#include "koa/dataset/records.hpp"

namespace koa::viz {

enum class PointSource { OriginalTest, SyntheticFuture, SyntheticPast };
std::string_view source_name(PointSource s) noexcept;

struct EmbeddingPoint {
  double x = 0;
  double y = 0;
  PointSource source = PointSource::OriginalTest;
  data::Stage stage = data::Stage::NoneDoubtful;
  std::string id;
};

struct TsneOptions {
  double perplexity = 30;
  int iterations = 1000;
  double early_exaggeration = 12;
  int exaggeration_iterations = 250;
  double learning_rate = 200;
  std::uint64_t seed = 0;
};

// Gaussian conditional distribution of one row of squared distances (self excluded by the
// caller setting its entry to +inf), bisected on the precision until the Shannon perplexity
// is within `tolerance` of the target.
struct Calibration {
  std::vector<double> p;
  double beta = 1;
  double perplexity = 0;
};
Calibration calibrate_row(const std::vector<double>& sq_distances, double perplexity, double tolerance = 1e-5);

struct TsneResult {
  std::vector<std::array<double, 2>> coords;
  std::vector<double> perplexities;  // achieved, per point
  double kl_divergence = 0;
};

// Exact O(N^2) t-SNE. Throws DomainError with fewer than 3*perplexity points or on
// non-finite or ragged features.
TsneResult tsne(const std::vector<std::vector<double>>& features, const TsneOptions& options = {});

struct LabeledFeature {
  std::vector<double> features;
  PointSource source = PointSource::OriginalTest;
  data::Stage stage = data::Stage::NoneDoubtful;
  std::string id;
};
std::vector<EmbeddingPoint> tsne_embed(const std::vector<LabeledFeature>& items, const TsneOptions& options = {});

struct GridAssignment {
  int side = 0;
  std::vector<int> cell;  // per point, row-major cell index
  double cost = 0;        // total squared displacement in normalized coordinates
  bool exact = true;
};

// Normalized position of every cell of a side x side grid, and of the points (min-max per axis).
std::vector<std::array<double, 2>> grid_positions(int side);
std::vector<std::array<double, 2>> normalize_points(const std::vector<std::array<double, 2>>& points);

// Injective point-to-cell assignment on a ceil(sqrt(N)) square grid minimising the total
// squared displacement. Exact (Hungarian) up to `exact_limit` points, greedy with eviction above.
GridAssignment rasterize_grid(const std::vector<std::array<double, 2>>& points, std::size_t exact_limit = 400);

// Rectangular min-cost assignment: rows to distinct columns, rows <= cols.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};
// Ordinary least squares; throws DomainError with fewer than two points or constant x.
LinearFit fit_linear(const std::vector<std::array<double, 2>>& points);

// Scatter of the embedding, coloured by stage, with point shape by source, and the fitted line.
RgbImage scatter_plot(const std::vector<EmbeddingPoint>& points, int size = 512, const LinearFit* line = nullptr);
// Tiles thumbnails into the assigned grid cells.
GrayImage grid_mosaic(const std::vector<GrayImage>& thumbs, const GridAssignment& grid, int tile);
// "id,x,y,source,stage" rows.
std::string embedding_rows_csv(const std::vector<EmbeddingPoint>& points);

}  // namespace koa::viz
