#include "gvseg/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "gvseg/errors.hpp"

namespace gvseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 read_png_rgb8(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }

  ImageU8 image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to read PNG " + path.string());
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG format (need 8-bit RGB): " + path.string());
  }

  image.width = static_cast<Index>(width);
  image.height = static_cast<Index>(height);
  image.rgb.resize(static_cast<std::size_t>(3) * width * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) {
    rows[r] = image.rgb.data() + static_cast<std::size_t>(3) * width * r;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png_rgb8(const std::filesystem::path& path, const ImageU8& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != static_cast<std::size_t>(3 * image.width * image.height)) {
    throw ShapeMismatchError("malformed image buffer");
  }
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }

  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to write PNG " + path.string());
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index r = 0; r < image.height; ++r) {
    rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(
        image.rgb.data() + static_cast<std::size_t>(3 * image.width * r));
  }
  png_write_rows(png, rows.data(), static_cast<png_uint_32>(rows.size()));
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

Tensor3d to_unit_tensor(const ImageU8& image) {
  Tensor3d out(image.height, image.width, 3);
  for (Index h = 0; h < image.height; ++h) {
    for (Index w = 0; w < image.width; ++w) {
      const Rgb px = image.at(h, w);
      for (Index c = 0; c < 3; ++c) {
        out(h, w, c) = static_cast<double>(px[static_cast<std::size_t>(c)]) / 255.0;
      }
    }
  }
  return out;
}

ImageU8 to_image_u8(const Tensor3d& tensor) {
  if (tensor.channels() != 3) throw ShapeMismatchError("expected 3 channels");
  ImageU8 out(tensor.height(), tensor.width());
  for (Index h = 0; h < tensor.height(); ++h) {
    for (Index w = 0; w < tensor.width(); ++w) {
      Rgb px{};
      for (Index c = 0; c < 3; ++c) {
        const double v = std::clamp(tensor(h, w, c), 0.0, 1.0);
        px[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
      out.set(h, w, px);
    }
  }
  return out;
}

}  // namespace gvseg
