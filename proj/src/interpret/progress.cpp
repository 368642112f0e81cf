#include "koa/interpret/progress.hpp"

#include <algorithm>
#include <numeric>

#include "koa/common/errors.hpp"

namespace koa::viz {
namespace {

// 3x5 glyphs, one row per 3-bit mask, most significant bit on the left.
constexpr std::uint8_t kDigits[10][5] = {
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
};

void blit(GrayImage& dst, const GrayImage& src, int row, int col) {
  for (int r = 0; r < src.rows; ++r)
    std::copy(src.row(r).begin(), src.row(r).end(), dst.pixels.begin() + static_cast<std::ptrdiff_t>(row + r) * dst.cols + col);
}

}  // namespace

void draw_number(GrayImage& img, int row, int col, int value, std::uint8_t ink, int scale) {
  const auto text = std::to_string(value);
  for (std::size_t k = 0; k < text.size(); ++k) {
    if (text[k] < '0' || text[k] > '9') continue;
    const auto& glyph = kDigits[text[k] - '0'];
    const int x0 = col + static_cast<int>(k) * 4 * scale;
    for (int gy = 0; gy < 5; ++gy) {
      for (int gx = 0; gx < 3; ++gx) {
        if (!(glyph[gy] & (4 >> gx))) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int r = row + gy * scale + sy, c = x0 + gx * scale + sx;
            if (r >= 0 && r < img.rows && c >= 0 && c < img.cols) img.at(r, c) = ink;
          }
        }
      }
    }
  }
}

GrayImage progress_strip(const std::vector<GrayImage>& frames, const std::vector<int>& epochs,
                         const StripOptions& options) {
  if (frames.empty()) throw DomainError("progress strip needs at least one frame");
  if (options.labels && epochs.size() != frames.size()) throw DomainError("progress strip: one epoch label per frame");
  const int h = frames.front().rows, w = frames.front().cols;
  for (const auto& f : frames)
    if (f.rows != h || f.cols != w) throw ShapeError("progress strip: frames differ in shape");
  const int k = static_cast<int>(frames.size());
  const int band = options.labels ? kLabelBand : 0;
  GrayImage out(h + band, k * w + (k - 1) * options.gutter, options.gutter_value);
  for (int i = 0; i < k; ++i) {
    const int col = i * (w + options.gutter);
    blit(out, frames[static_cast<std::size_t>(i)], band, col);
    if (options.labels) {
      for (int r = 0; r < band; ++r)
        for (int c = col; c < col + w; ++c) out.at(r, c) = 0;
      draw_number(out, 2, col + 2, epochs[static_cast<std::size_t>(i)], 255);
    }
  }
  return out;
}

GrayImage stack_rows(const std::vector<GrayImage>& rows, int gutter, std::uint8_t gutter_value) {
  if (rows.empty()) throw DomainError("stack_rows: nothing to stack");
  const int w = rows.front().cols;
  int h = 0;
  for (const auto& r : rows) {
    if (r.cols != w) throw ShapeError("stack_rows: rows differ in width");
    h += r.rows;
  }
  h += gutter * (static_cast<int>(rows.size()) - 1);
  GrayImage out(h, w, gutter_value);
  int at = 0;
  for (const auto& r : rows) {
    blit(out, r, at, 0);
    at += r.rows + gutter;
  }
  return out;
}

ProgressPanel progress_panel(const std::vector<std::filesystem::path>& checkpoints, const GrayImage& probe,
                             gan::Direction direction, const StripOptions& options) {
  if (checkpoints.empty()) throw DomainError("progress panel needs at least one checkpoint");
  struct Loaded {
    int epoch;
    GrayImage forward, backward;
  };
  const auto opposite = direction == gan::Direction::TowardFuture ? gan::Direction::TowardPast : gan::Direction::TowardFuture;
  std::vector<Loaded> loaded;
  for (const auto& path : checkpoints) {
    auto state = gan::load_checkpoint(path);
    state->nets.train(false);
    loaded.push_back({state->epoch, gan::transform(probe, direction, state->nets), gan::transform(probe, opposite, state->nets)});
  }
  std::stable_sort(loaded.begin(), loaded.end(), [](const Loaded& a, const Loaded& b) { return a.epoch < b.epoch; });
  ProgressPanel p;
  std::vector<GrayImage> fwd, bwd;
  for (auto& l : loaded) {
    p.epochs.push_back(l.epoch);
    fwd.push_back(std::move(l.forward));
    bwd.push_back(std::move(l.backward));
  }
  auto second = options;
  second.labels = false;  // shared epoch axis
  p.image = stack_rows({progress_strip(fwd, p.epochs, options), progress_strip(bwd, p.epochs, second)}, options.gutter,
                       options.gutter_value);
  return p;
}

}  // namespace koa::viz
