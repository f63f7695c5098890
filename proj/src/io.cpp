#include "sparseseg/io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include "json.hpp"
#include <sstream>

namespace sparseseg::io {

namespace {

[[noreturn]] void io_error(const std::string& message) { throw Error(ErrorKind::IoError, message); }

struct ReadCursor {
  const Bytes* data;
  std::size_t offset;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->data->size()) png_error(png, "truncated PNG");
  std::memcpy(out, cursor->data->data() + cursor->offset, length);
  cursor->offset += length;
}

void png_write_callback(png_structp png, png_bytep in, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + length);
}

void png_flush_callback(png_structp) {}

void png_error_callback(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void png_warning_callback(png_structp, png_const_charp) {}

// Decoded rows, 8 bits per sample.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

DecodedPng decode_png(const Bytes& bytes, bool keep_palette_indices) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) io_error("not a PNG stream");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_callback,
                                           png_warning_callback);
  if (!png) io_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  DecodedPng out;
  std::vector<png_bytep> rows;
  ReadCursor cursor{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    io_error("PNG decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, png_read_callback);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    if (keep_palette_indices) {
      if (bit_depth < 8) png_set_packing(png);
    } else {
      png_set_palette_to_rgb(png);
    }
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (!keep_palette_indices && png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.channels = int(png_get_channels(png, info));
  const std::size_t stride = png_get_rowbytes(png, info);
  out.pixels.resize(stride * std::size_t(out.height));
  rows.resize(std::size_t(out.height));
  for (int y = 0; y < out.height; ++y) rows[std::size_t(y)] = out.pixels.data() + stride * std::size_t(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

Bytes encode_png(int width, int height, int color_type, int bit_depth,
                 const std::vector<std::uint8_t>& rows_data) {
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_callback,
                                            png_warning_callback);
  if (!png) io_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  Bytes out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    io_error("PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = std::size_t(width) * std::size_t(channels) * std::size_t(bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows_data.data() + stride * std::size_t(y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, int& value) {
  s = trim(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

void append_octal(Bytes& header, std::size_t offset, std::size_t width, std::uint64_t value) {
  std::string digits(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0;) {
    digits[i] = char('0' + (value & 7));
    value >>= 3;
  }
  std::memcpy(header.data() + offset, digits.data(), width - 1);
  header[offset + width - 1] = 0;
}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  out.write(contents.data(), std::streamsize(contents.size()));
  if (!out) io_error("write failed: " + path.string());
}

void write_file(const std::filesystem::path& path, const Bytes& contents) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(contents.data()), contents.size()));
}

RgbImage decode_rgb_png(const Bytes& png) {
  const DecodedPng raw = decode_png(png, false);
  RgbImage image(ImageDims(raw.width, raw.height));
  const std::size_t stride = std::size_t(raw.width) * std::size_t(raw.channels);
  for (int y = 0; y < raw.height; ++y) {
    const std::uint8_t* row = raw.pixels.data() + stride * std::size_t(y);
    for (int x = 0; x < raw.width; ++x) {
      const std::uint8_t* px = row + std::size_t(x) * std::size_t(raw.channels);
      if (raw.channels >= 3) {
        image.set(x, y, {px[0], px[1], px[2]});
      } else {
        image.set(x, y, {px[0], px[0], px[0]});
      }
    }
  }
  return image;
}

RgbImage read_rgb_png(const std::filesystem::path& path) { return decode_rgb_png(read_file(path)); }

Bytes encode_rgb_png(const RgbImage& image) {
  const ImageDims dims = image.dims();
  std::vector<std::uint8_t> rows(dims.pixel_count() * 3);
  std::size_t k = 0;
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      rows[k++] = image.r(y, x);
      rows[k++] = image.g(y, x);
      rows[k++] = image.b(y, x);
    }
  }
  return encode_png(dims.width, dims.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, encode_rgb_png(image));
}

LabelMap decode_label_png(const Bytes& png) {
  const DecodedPng raw = decode_png(png, true);
  if (raw.channels != 1) io_error("label PNG must be single-channel (grey or palette)");
  Grid<ClassId> data(raw.height, raw.width);
  std::copy(raw.pixels.begin(), raw.pixels.end(), data.data());
  return LabelMap(std::move(data));
}

LabelMap read_label_png(const std::filesystem::path& path) {
  return decode_label_png(read_file(path));
}

Bytes encode_gray8_png(const Grid<std::uint8_t>& values) {
  std::vector<std::uint8_t> rows(values.data(), values.data() + values.size());
  return encode_png(int(values.cols()), int(values.rows()), PNG_COLOR_TYPE_GRAY, 8, rows);
}

Bytes encode_label_png(const LabelMap& labels) { return encode_gray8_png(labels.data()); }

void write_label_png(const std::filesystem::path& path, const LabelMap& labels) {
  write_file(path, encode_label_png(labels));
}

Bytes encode_gray16_png(const Grid<std::uint16_t>& values) {
  std::vector<std::uint8_t> rows(std::size_t(values.size()) * 2);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    rows[std::size_t(i) * 2] = std::uint8_t(values.data()[i] >> 8);  // big-endian
    rows[std::size_t(i) * 2 + 1] = std::uint8_t(values.data()[i] & 0xff);
  }
  return encode_png(int(values.cols()), int(values.rows()), PNG_COLOR_TYPE_GRAY, 16, rows);
}

Bytes encode_field_png(const Grid<double>& field, double lo, double hi) {
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  const Grid<std::uint8_t> gray =
      ((field - lo) * scale).max(0.0).min(255.0).round().cast<std::uint8_t>();
  return encode_gray8_png(gray);
}

RgbImage overlay(const RgbImage& image, const LabelMap& labels, const LabelSchema& schema,
                 double opacity) {
  if (image.dims() != labels.dims()) {
    throw Error(ErrorKind::DimsMismatch, "overlay image and label map dims differ");
  }
  opacity = std::clamp(opacity, 0.0, 1.0);
  RgbImage out = image;
  const ImageDims dims = image.dims();
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const ClassId c = labels({x, y});
      if (c == kUnlabeled) continue;
      const Rgb color = std::size_t(c) < schema.colors.size() ? schema.colors[c] : default_class_color(c);
      const Rgb base = image.at(x, y);
      Rgb blended;
      for (int k = 0; k < 3; ++k) {
        blended[std::size_t(k)] = std::uint8_t(std::lround((1.0 - opacity) * base[std::size_t(k)] +
                                                           opacity * color[std::size_t(k)]));
      }
      out.set(x, y, blended);
    }
  }
  return out;
}

std::vector<CsvPoint> parse_points_csv(std::string_view text) {
  std::vector<CsvPoint> out;
  std::size_t start = 0;
  int line_no = 0;
  bool header_seen = false;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != "x,y,label") {
        throw Error(ErrorKind::InvalidArgument, "points CSV must start with header x,y,label");
      }
      header_seen = true;
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    CsvPoint row;
    row.row = int(out.size()) + 1;
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos ||
        !parse_int(line.substr(0, c1), row.point.x) ||
        !parse_int(line.substr(c1 + 1, c2 - c1 - 1), row.point.y) ||
        !parse_int(line.substr(c2 + 1), row.label)) {
      throw Error(ErrorKind::InvalidArgument,
                  "malformed points CSV row " + std::to_string(row.row) + " (line " +
                      std::to_string(line_no) + ")");
    }
    out.push_back(row);
  }
  if (!header_seen) throw Error(ErrorKind::InvalidArgument, "points CSV is empty");
  return out;
}

std::vector<CsvPoint> read_points_csv(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_points_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_points_csv(const std::vector<CsvPoint>& points) {
  std::string out = "x,y,label\n";
  for (const CsvPoint& p : points) {
    out += std::to_string(p.point.x) + "," + std::to_string(p.point.y) + "," +
           std::to_string(p.label) + "\n";
  }
  return out;
}

std::string format_points_csv(const PointLabelSet& points) {
  std::vector<CsvPoint> rows;
  for (const PointLabel& p : points) rows.push_back({p.point, p.label, p.order_index + 1});
  return format_points_csv(rows);
}

PointLabelSet to_point_set(const std::vector<CsvPoint>& rows, ImageDims dims, int class_count) {
  PointLabelSet out;
  for (const CsvPoint& row : rows) {
    const std::string where = "points CSV row " + std::to_string(row.row);
    if (!in_bounds(dims, row.point)) {
      throw Error(ErrorKind::InvalidArgument, where + ": point (" + std::to_string(row.point.x) +
                                                  "," + std::to_string(row.point.y) +
                                                  ") is outside the image");
    }
    if (row.label == kUnlabeled) continue;
    if (row.label < 0 || row.label >= class_count) {
      throw Error(ErrorKind::InvalidArgument, where + ": label " + std::to_string(row.label) +
                                                  " out of range");
    }
    if (out.contains(row.point)) {
      throw Error(ErrorKind::InvalidArgument, where + ": duplicate point");
    }
    out.add(row.point, ClassId(row.label));
  }
  return out;
}

LabelSchema parse_schema_json(std::string_view text) {
  LabelSchema schema;
  try {
    const auto doc = nlohmann::json::parse(text);
    schema.background_id = doc.value("background_id", ClassId{0});
    auto classes = doc.at("classes");
    std::sort(classes.begin(), classes.end(),
              [](const auto& a, const auto& b) { return a.at("id").template get<int>() < b.at("id").template get<int>(); });
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const auto& c = classes[i];
      if (c.at("id").get<int>() != int(i)) {
        throw Error(ErrorKind::InvalidArgument, "schema class ids must be 0..m-1");
      }
      schema.names.push_back(c.at("name").get<std::string>());
      if (c.contains("color")) {
        const auto rgb = c.at("color").get<std::array<int, 3>>();
        schema.colors.push_back({std::uint8_t(rgb[0]), std::uint8_t(rgb[1]), std::uint8_t(rgb[2])});
      } else {
        schema.colors.push_back(default_class_color(int(i)));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("schema JSON: ") + e.what());
  }
  schema.validate();
  return schema;
}

LabelSchema read_schema(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_schema_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_schema_json(const LabelSchema& schema) {
  nlohmann::json doc;
  doc["background_id"] = schema.background_id;
  doc["classes"] = nlohmann::json::array();
  for (int c = 0; c < schema.class_count(); ++c) {
    const Rgb color = std::size_t(c) < schema.colors.size() ? schema.colors[std::size_t(c)]
                                                            : default_class_color(c);
    doc["classes"].push_back({{"id", c},
                              {"name", schema.names[std::size_t(c)]},
                              {"color", {color[0], color[1], color[2]}}});
  }
  return doc.dump(2) + "\n";
}

void TarWriter::add(const std::string& name, std::string_view contents) {
  if (name.size() >= 100) throw Error(ErrorKind::InvalidArgument, "tar entry name too long");
  Bytes header(512, 0);
  std::memcpy(header.data(), name.data(), name.size());
  append_octal(header, 100, 8, 0644);
  append_octal(header, 108, 8, 0);
  append_octal(header, 116, 8, 0);
  append_octal(header, 124, 12, contents.size());
  append_octal(header, 136, 12, 0);  // mtime fixed for reproducible archives
  header[156] = '0';
  std::memcpy(header.data() + 257, "ustar", 6);
  header[263] = '0';
  header[264] = '0';
  std::fill_n(header.begin() + 148, 8, ' ');
  unsigned checksum = 0;
  for (std::uint8_t b : header) checksum += b;
  append_octal(header, 148, 7, checksum);
  header[155] = ' ';
  buffer_.insert(buffer_.end(), header.begin(), header.end());
  buffer_.insert(buffer_.end(), contents.begin(), contents.end());
  buffer_.resize((buffer_.size() + 511) / 512 * 512, 0);
}

void TarWriter::add(const std::string& name, const Bytes& contents) {
  add(name, std::string_view(reinterpret_cast<const char*>(contents.data()), contents.size()));
}

Bytes TarWriter::finish() && {
  buffer_.resize(buffer_.size() + 1024, 0);
  return std::move(buffer_);
}

std::vector<TarEntry> read_tar(const Bytes& archive) {
  std::vector<TarEntry> out;
  std::size_t offset = 0;
  while (offset + 512 <= archive.size()) {
    const std::uint8_t* header = archive.data() + offset;
    if (std::all_of(header, header + 512, [](std::uint8_t b) { return b == 0; })) break;
    TarEntry entry;
    entry.name.assign(reinterpret_cast<const char*>(header),
                      strnlen(reinterpret_cast<const char*>(header), 100));
    std::size_t size = 0;
    for (int i = 124; i < 135 && header[i] >= '0' && header[i] <= '7'; ++i) size = size * 8 + (header[i] - '0');
    offset += 512;
    if (offset + size > archive.size()) io_error("truncated tar archive");
    entry.contents.assign(archive.begin() + std::ptrdiff_t(offset), archive.begin() + std::ptrdiff_t(offset + size));
    offset += (size + 511) / 512 * 512;
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace sparseseg::io
