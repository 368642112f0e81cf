#pragma once

#include <filesystem>
#include <vector>

#include "koa/common/image.hpp"
#include "koa/gan/cycle_gan.hpp"

namespace koa::viz {

struct StripOptions {
  int gutter = 2;
  std::uint8_t gutter_value = 255;
  bool labels = true;  // epoch numbers in a band above each frame
};

// Frames side by side. Width is k*w + (k-1)*gutter; with labels a band of kLabelBand rows
// is added on top. Throws DomainError when empty and ShapeError on mismatched frames.
constexpr int kLabelBand = 9;
GrayImage progress_strip(const std::vector<GrayImage>& frames, const std::vector<int>& epochs,
                         const StripOptions& options = {});

// Vertical stack of equally wide rows separated by `gutter` rows.
GrayImage stack_rows(const std::vector<GrayImage>& rows, int gutter = 2, std::uint8_t gutter_value = 255);

// Digits in a 3x5 pixel font, scaled by `scale`, with the top-left corner at (row, col).
void draw_number(GrayImage& img, int row, int col, int value, std::uint8_t ink, int scale = 1);

struct ProgressPanel {
  GrayImage image;
  std::vector<int> epochs;  // order of the columns
};

// Loads every checkpoint, orders them by epoch and transforms the probe with each generator:
// the first row uses the direction given, the second the opposite one (both rows share the
// epoch axis).
ProgressPanel progress_panel(const std::vector<std::filesystem::path>& checkpoints, const GrayImage& probe,
                             gan::Direction direction, const StripOptions& options = {});

}  // namespace koa::viz
