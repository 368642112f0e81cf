#include "koa/common/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "koa/common/errors.hpp"

namespace koa {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

struct Reader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  Reader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw IoError("png: cannot allocate reader");
    info = png_create_info_struct(png);
  }
  ~Reader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct Writer {
  png_structp png = nullptr;
  png_infop info = nullptr;
  Writer() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw IoError("png: cannot allocate writer");
    info = png_create_info_struct(png);
  }
  ~Writer() { png_destroy_write_struct(&png, &info); }
};

void open_for_read(Reader& r, std::FILE* f, const std::filesystem::path& path) {
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_init_io(r.png, f);
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
}

void write_impl(const std::filesystem::path& path, int rows, int cols, int color_type, int channels,
                const std::uint8_t* data, const PngText& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto f = open_file(path, "wb");
  Writer w;
  png_init_io(w.png, f.get());
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_text> chunks(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = const_cast<char*>(text[i].first.c_str());
    chunks[i].text = const_cast<char*>(text[i].second.c_str());
    chunks[i].text_length = text[i].second.size();
  }
  if (!chunks.empty()) png_set_text(w.png, w.info, chunks.data(), static_cast<int>(chunks.size()));
  png_write_info(w.png, w.info);
  const std::size_t stride = static_cast<std::size_t>(cols) * channels;
  for (int r = 0; r < rows; ++r) {
    png_write_row(w.png, const_cast<png_bytep>(data + r * stride));
  }
  png_write_end(w.png, nullptr);
}

}  // namespace

GrayImage read_png_gray(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  Reader r;
  open_for_read(r, f.get(), path);

  const auto bit_depth = png_get_bit_depth(r.png, r.info);
  const auto color = png_get_color_type(r.png, r.info);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(r.png, 1, -1, -1);
  }
  png_read_update_info(r.png, r.info);

  const int cols = static_cast<int>(png_get_image_width(r.png, r.info));
  const int rows = static_cast<int>(png_get_image_height(r.png, r.info));
  if (png_get_rowbytes(r.png, r.info) != static_cast<std::size_t>(cols)) {
    throw IoError("unsupported PNG layout: " + path.string());
  }
  GrayImage img(rows, cols);
  for (int row = 0; row < rows; ++row) {
    png_read_row(r.png, img.pixels.data() + static_cast<std::size_t>(row) * cols, nullptr);
  }
  png_read_end(r.png, nullptr);
  return img;
}

PngText read_png_text(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  Reader r;
  open_for_read(r, f.get(), path);
  png_textp chunks = nullptr;
  int count = 0;
  png_get_text(r.png, r.info, &chunks, &count);
  PngText out;
  for (int i = 0; i < count; ++i) out.emplace_back(chunks[i].key, chunks[i].text);
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img, const PngText& text) {
  write_impl(path, img.rows, img.cols, PNG_COLOR_TYPE_GRAY, 1, img.pixels.data(), text);
}

void write_png(const std::filesystem::path& path, const RgbImage& img, const PngText& text) {
  static_assert(sizeof(Rgb) == 3);
  write_impl(path, img.rows, img.cols, PNG_COLOR_TYPE_RGB, 3, reinterpret_cast<const std::uint8_t*>(img.pixels.data()),
             text);
}

}  // namespace koa
