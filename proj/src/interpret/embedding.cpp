#include "koa/interpret/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "koa/common/errors.hpp"
#include "koa/common/random.hpp"

namespace koa::viz {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Box-Muller on the project RNG so the initial layout replays identically across toolchains.
double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double sq(double v) { return v * v; }

}  // namespace

std::string_view source_name(PointSource s) noexcept {
  switch (s) {
    case PointSource::OriginalTest: return "original";
    case PointSource::SyntheticFuture: return "synthetic_future";
    case PointSource::SyntheticPast: return "synthetic_past";
  }
  return "?";
}

Calibration calibrate_row(const std::vector<double>& d, double perplexity, double tolerance) {
  if (!(perplexity > 0)) throw DomainError("perplexity must be positive");
  Calibration c;
  c.p.assign(d.size(), 0.0);
  double dmin = kInf;
  for (double v : d)
    if (v < dmin) dmin = v;
  if (!std::isfinite(dmin)) throw DomainError("calibrate_row: no finite distances");
  const double target = std::log(perplexity);
  double lo = 0, hi = kInf, beta = 1;
  double h = 0;
  for (int iter = 0; iter < 200; ++iter) {
    double sum = 0, wsum = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      c.p[j] = std::isfinite(d[j]) ? std::exp(-(d[j] - dmin) * beta) : 0.0;
      sum += c.p[j];
      wsum += (std::isfinite(d[j]) ? d[j] - dmin : 0.0) * c.p[j];
    }
    h = std::log(sum) + beta * wsum / sum;
    for (auto& v : c.p) v /= sum;
    if (std::abs(std::exp(h) - perplexity) < tolerance) break;
    if (h > target) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
    } else {
      hi = beta;
      beta = (beta + lo) / 2;
    }
  }
  c.beta = beta;
  c.perplexity = std::exp(h);
  return c;
}

TsneResult tsne(const std::vector<std::vector<double>>& features, const TsneOptions& o) {
  const std::size_t n = features.size();
  if (static_cast<double>(n) < 3.0 * o.perplexity)
    throw DomainError("t-SNE needs at least 3*perplexity points (" + std::to_string(n) + " given)");
  if (n < 2) throw DomainError("t-SNE needs at least two points");
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) throw DomainError("t-SNE: feature vectors differ in length");
    for (double v : f)
      if (!std::isfinite(v)) throw DomainError("t-SNE: non-finite feature");
  }

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < dim; ++k) s += sq(features[i][k] - features[j][k]);
      dist[i * n + j] = dist[j * n + i] = s;
    }
  }

  TsneResult out;
  out.perplexities.resize(n);
  std::vector<double> p(n * n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = i == j ? kInf : dist[i * n + j];
    const auto c = calibrate_row(row, o.perplexity);
    out.perplexities[i] = c.perplexity;
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = c.p[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
      p[i * n + j] = p[j * n + i] = s;
    }
    p[i * n + i] = 0;
  }

  Rng rng(derive_seed(o.seed, 0x75e0));
  std::vector<double> y(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0), grad(2 * n);
  for (auto& v : y) v = 1e-4 * gaussian(rng);
  std::vector<double> num(n * n);

  for (int it = 0; it < o.iterations; ++it) {
    const double exaggeration = it < o.exaggeration_iterations ? o.early_exaggeration : 1.0;
    const double momentum = it < o.exaggeration_iterations ? 0.5 : 0.8;
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) {
      num[i * n + i] = 0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double q = 1.0 / (1.0 + sq(y[2 * i] - y[2 * j]) + sq(y[2 * i + 1] - y[2 * j + 1]));
        num[i * n + j] = num[j * n + i] = q;
        z += 2 * q;
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double m = (exaggeration * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
        grad[2 * i] += 4 * m * (y[2 * i] - y[2 * j]);
        grad[2 * i + 1] += 4 * m * (y[2 * i + 1] - y[2 * j + 1]);
      }
    }
    for (std::size_t k = 0; k < 2 * n; ++k) {
      gains[k] = (grad[k] > 0) != (update[k] > 0) ? gains[k] + 0.2 : gains[k] * 0.8;
      gains[k] = std::max(gains[k], 0.01);
      update[k] = momentum * update[k] - o.learning_rate * gains[k] * grad[k];
      y[k] += update[k];
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx / static_cast<double>(n);
      y[2 * i + 1] -= my / static_cast<double>(n);
    }
  }

  double z = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) z += 1.0 / (1.0 + sq(y[2 * i] - y[2 * j]) + sq(y[2 * i + 1] - y[2 * j + 1]));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(1.0 / (1.0 + sq(y[2 * i] - y[2 * j]) + sq(y[2 * i + 1] - y[2 * j + 1])) / z, 1e-12);
      out.kl_divergence += p[i * n + j] * std::log(p[i * n + j] / q);
    }
  }
  out.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.coords[i] = {y[2 * i], y[2 * i + 1]};
  return out;
}

std::vector<EmbeddingPoint> tsne_embed(const std::vector<LabeledFeature>& items, const TsneOptions& options) {
  std::vector<std::vector<double>> f;
  f.reserve(items.size());
  for (const auto& it : items) f.push_back(it.features);
  const auto r = tsne(f, options);
  std::vector<EmbeddingPoint> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    out[i] = {r.coords[i][0], r.coords[i][1], items[i].source, items[i].stage, items[i].id};
  return out;
}

std::vector<std::array<double, 2>> grid_positions(int side) {
  std::vector<std::array<double, 2>> pos;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      pos.push_back(side == 1 ? std::array<double, 2>{0.5, 0.5}
                              : std::array<double, 2>{static_cast<double>(c) / (side - 1), static_cast<double>(r) / (side - 1)});
  return pos;
}

std::vector<std::array<double, 2>> normalize_points(const std::vector<std::array<double, 2>>& points) {
  auto out = points;
  for (int axis = 0; axis < 2; ++axis) {
    double lo = kInf, hi = -kInf;
    for (const auto& p : points) {
      lo = std::min(lo, p[axis]);
      hi = std::max(hi, p[axis]);
    }
    for (auto& p : out) p[axis] = hi > lo ? (p[axis] - lo) / (hi - lo) : 0.5;
  }
  return out;
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  // Hungarian method with row/column potentials, O(n^2 m).
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost.front().size();
  if (n > m) throw DomainError("assignment: more rows than columns");
  std::vector<double> u(n + 1, 0), v(m + 1, 0), minv(m + 1);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (owner[j] != 0) result[owner[j] - 1] = static_cast<int>(j - 1);
  return result;
}

GridAssignment rasterize_grid(const std::vector<std::array<double, 2>>& points, std::size_t exact_limit) {
  GridAssignment g;
  const std::size_t n = points.size();
  if (n == 0) return g;
  g.side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-9));
  while (static_cast<std::size_t>(g.side) * static_cast<std::size_t>(g.side) < n) ++g.side;
  const auto cells = grid_positions(g.side);
  const auto pts = normalize_points(points);
  auto cost = [&](std::size_t i, std::size_t c) { return sq(pts[i][0] - cells[c][0]) + sq(pts[i][1] - cells[c][1]); };

  if (n <= exact_limit) {
    std::vector<std::vector<double>> m(n, std::vector<double>(cells.size()));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < cells.size(); ++c) m[i][c] = cost(i, c);
    g.cell = solve_assignment(m);
  } else {
    // Points propose to cells in order of distance; an occupied cell keeps the closer point
    // and the evicted one moves on to its next choice.
    g.exact = false;
    std::vector<std::vector<int>> prefs(n);
    for (std::size_t i = 0; i < n; ++i) {
      prefs[i].resize(cells.size());
      std::iota(prefs[i].begin(), prefs[i].end(), 0);
      std::stable_sort(prefs[i].begin(), prefs[i].end(), [&](int a, int b) {
        return cost(i, static_cast<std::size_t>(a)) < cost(i, static_cast<std::size_t>(b));
      });
    }
    std::vector<int> holder(cells.size(), -1);
    std::vector<std::size_t> next(n, 0);
    std::deque<std::size_t> queue(n);
    std::iota(queue.begin(), queue.end(), std::size_t{0});
    g.cell.assign(n, -1);
    while (!queue.empty()) {
      const auto i = queue.front();
      queue.pop_front();
      const auto c = static_cast<std::size_t>(prefs[i][next[i]++]);
      const int h = holder[c];
      if (h < 0) {
        holder[c] = static_cast<int>(i);
        g.cell[i] = static_cast<int>(c);
      } else if (cost(i, c) < cost(static_cast<std::size_t>(h), c)) {
        holder[c] = static_cast<int>(i);
        g.cell[i] = static_cast<int>(c);
        g.cell[static_cast<std::size_t>(h)] = -1;
        queue.push_back(static_cast<std::size_t>(h));
      } else {
        queue.push_back(i);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) g.cost += cost(i, static_cast<std::size_t>(g.cell[i]));
  return g;
}

LinearFit fit_linear(const std::vector<std::array<double, 2>>& points) {
  if (points.size() < 2) throw DomainError("linear fit needs at least two points");
  const double n = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p[0] / n;
    my += p[1] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : points) {
    sxx += sq(p[0] - mx);
    sxy += (p[0] - mx) * (p[1] - my);
    syy += sq(p[1] - my);
  }
  if (!(sxx > 0)) throw DomainError("linear fit: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

RgbImage scatter_plot(const std::vector<EmbeddingPoint>& points, int size, const LinearFit* line) {
  RgbImage img(size, size, {255, 255, 255});
  if (points.empty()) return img;
  std::vector<std::array<double, 2>> xy;
  for (const auto& p : points) xy.push_back({p.x, p.y});
  double lo[2] = {kInf, kInf}, hi[2] = {-kInf, -kInf};
  for (const auto& p : xy)
    for (int a = 0; a < 2; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const int margin = size / 16;
  auto px = [&](double v, int a) {
    const double t = hi[a] > lo[a] ? (v - lo[a]) / (hi[a] - lo[a]) : 0.5;
    return margin + static_cast<int>(std::lround(t * (size - 1 - 2 * margin)));
  };
  auto put = [&](int r, int c, Rgb col) {
    if (r >= 0 && r < size && c >= 0 && c < size) img.at(r, c) = col;
  };
  if (line != nullptr) {
    for (int c = margin; c < size - margin; ++c) {
      const double x = lo[0] + (hi[0] - lo[0]) * (c - margin) / std::max(1, size - 1 - 2 * margin);
      const double yv = line->slope * x + line->intercept;
      if (yv >= lo[1] && yv <= hi[1]) put(size - 1 - px(yv, 1), c, {120, 120, 120});
    }
  }
  static constexpr Rgb kStageColour[3] = {{31, 119, 180}, {255, 127, 14}, {214, 39, 40}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int c = px(xy[i][0], 0), r = size - 1 - px(xy[i][1], 1);
    const Rgb col = kStageColour[data::index_of(points[i].stage)];
    for (int d = -2; d <= 2; ++d) {
      switch (points[i].source) {
        case PointSource::OriginalTest:
          for (int e = -1; e <= 1; ++e)
            if (std::abs(d) <= 1) put(r + d, c + e, col);
          break;
        case PointSource::SyntheticFuture:
          put(r + d, c, col);
          put(r, c + d, col);
          break;
        case PointSource::SyntheticPast:
          put(r + d, c + d, col);
          put(r + d, c - d, col);
          break;
      }
    }
  }
  return img;
}

GrayImage grid_mosaic(const std::vector<GrayImage>& thumbs, const GridAssignment& grid, int tile) {
  if (thumbs.size() != grid.cell.size()) throw DomainError("grid mosaic: one thumbnail per point");
  GrayImage out(grid.side * tile, grid.side * tile, 0);
  for (std::size_t i = 0; i < thumbs.size(); ++i) {
    const auto& t = thumbs[i];
    if (t.rows < 1 || t.cols < 1) throw ShapeError("grid mosaic: empty thumbnail");
    const int r0 = grid.cell[i] / grid.side * tile, c0 = grid.cell[i] % grid.side * tile;
    for (int r = 0; r < tile; ++r)
      for (int c = 0; c < tile; ++c) out.at(r0 + r, c0 + c) = t.at(r * t.rows / tile, c * t.cols / tile);
  }
  return out;
}

std::string embedding_rows_csv(const std::vector<EmbeddingPoint>& points) {
  std::ostringstream os;
  os << "id,x,y,source,stage\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", p.x, p.y);
    os << p.id << ',' << buf << ',' << source_name(p.source) << ',' << data::stage_name(p.stage) << '\n';
  }
  return os.str();
}

}  // namespace koa::viz
