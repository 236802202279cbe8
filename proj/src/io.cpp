#include "photoloss/io.hpp"

#include <png.h>

#include <Eigen/Geometry>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace photoloss {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

float byteswap_f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = __builtin_bswap32(bits);
  std::memcpy(&v, &bits, 4);
  return v;
}

constexpr bool host_little_endian() {
  return std::endian::native == std::endian::little;
}

}  // namespace

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), long(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

void write_pfm(const std::filesystem::path& path, const Grid& values) {
  const int h = int(values.rows());
  const int w = int(values.cols());
  std::string bytes;
  bytes += "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  bytes.reserve(bytes.size() + size_t(h) * size_t(w) * 4);
  // bottom-up scanlines, little-endian float32
  for (int v = h - 1; v >= 0; --v)
    for (int u = 0; u < w; ++u) {
      float f = float(values(v, u));
      if (!host_little_endian()) f = byteswap_f32(f);
      char raw[4];
      std::memcpy(raw, &f, 4);
      bytes.append(raw, 4);
    }
  atomic_write_file(path, bytes);
}

Grid read_pfm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0 || !in)
    throw ParseError(path.string() + ": not a grayscale PFM file");
  in.get();  // single whitespace after the scale line
  const size_t offset = size_t(in.tellg());
  const size_t need = size_t(w) * size_t(h) * 4;
  if (bytes.size() - offset < need)
    throw ParseError(path.string() + ": truncated PFM payload");

  const bool data_little = scale < 0.0;
  Grid out(h, w);
  const char* p = bytes.data() + offset;
  for (int v = h - 1; v >= 0; --v)
    for (int u = 0; u < w; ++u) {
      float f;
      std::memcpy(&f, p, 4);
      p += 4;
      if (data_little != host_little_endian()) f = byteswap_f32(f);
      out(v, u) = double(f);
    }
  return out;
}

namespace {

struct PngWriteBuffer {
  std::string bytes;
};

void png_write_to_string(png_structp png, png_bytep data, png_size_t n) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.append(reinterpret_cast<const char*>(data), n);
}

void png_noop_flush(png_structp) {}

void encode_png(const std::filesystem::path& path,
                const std::vector<const Grid*>& planes, int bit_depth,
                double scale) {
  const int h = int(planes[0]->rows());
  const int w = int(planes[0]->cols());
  const int channels = int(planes.size());
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  const double maxval = bit_depth == 8 ? 255.0 : 65535.0;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  PngWriteBuffer buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failure writing " + path.string());
  }
  png_set_write_fn(png, &buf, png_write_to_string, png_noop_flush);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);

  const int bytes_per_sample = bit_depth / 8;
  std::vector<png_byte> row(size_t(w) * size_t(channels) * size_t(bytes_per_sample));
  for (int v = 0; v < h; ++v) {
    size_t i = 0;
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) {
        const double val = std::clamp((*planes[size_t(c)])(v, u) * scale, 0.0, 1.0);
        const auto q = std::uint32_t(std::lround(val * maxval));
        if (bit_depth == 8) {
          row[i++] = png_byte(q);
        } else {
          row[i++] = png_byte(q >> 8);  // network byte order
          row[i++] = png_byte(q & 0xff);
        }
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  atomic_write_file(path, buf.bytes);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw std::invalid_argument("write_png: bit depth must be 8 or 16");
  std::vector<const Grid*> planes;
  for (int c = 0; c < image.channels(); ++c) planes.push_back(&image.plane(c));
  encode_png(path, planes, bit_depth, 1.0);
}

void write_png16_scaled(const std::filesystem::path& path, const Grid& values,
                        double scale) {
  encode_png(path, {&values}, 16, scale);
}

Image read_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("libpng failure reading " + path.string());
  }

  struct Reader {
    const std::string* bytes;
    size_t offset;
  } reader{&bytes, 0};
  png_set_read_fn(png, &reader, [](png_structp p, png_bytep out, png_size_t n) {
    auto* r = static_cast<Reader*>(png_get_io_ptr(p));
    if (r->offset + n > r->bytes->size()) png_error(p, "truncated PNG");
    std::memcpy(out, r->bytes->data() + r->offset, n);
    r->offset += n;
  });

  png_read_info(png, info);
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if ((color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) ||
      (bit_depth != 8 && bit_depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": unsupported PNG layout");
  }
  const int channels = color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  const double maxval = bit_depth == 8 ? 255.0 : 65535.0;

  std::vector<Grid> planes(size_t(channels), Grid(h, w));
  std::vector<png_byte> row(size_t(w) * size_t(channels) * size_t(bit_depth / 8));
  for (int v = 0; v < h; ++v) {
    png_read_row(png, row.data(), nullptr);
    size_t i = 0;
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) {
        std::uint32_t q;
        if (bit_depth == 8) {
          q = row[i++];
        } else {
          q = std::uint32_t(row[i]) << 8 | row[i + 1];
          i += 2;
        }
        planes[size_t(c)](v, u) = double(q) / maxval;
      }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return Image(std::move(planes));
}

void write_trajectory_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::string text = "# index tx ty tz qx qy qz qw\n";
  for (const TrajectoryEntry& e : traj) {
    Eigen::Quaterniond q(e.pose.rotation_matrix());
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    text += std::to_string(e.index);
    for (double v : {e.pose.translation.x(), e.pose.translation.y(),
                     e.pose.translation.z(), q.x(), q.y(), q.z(), q.w()})
      text += " " + format_double(v);
    text += "\n";
  }
  atomic_write_file(path, text);
}

Trajectory read_trajectory_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    TrajectoryEntry e;
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> e.index >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'index tx ty tz qx qy qz qw'");
    std::string extra;
    if (ls >> extra)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": trailing fields");
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-12)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": zero quaternion");
    q.normalize();
    e.pose.rotation = matrix_to_axis_angle(q.toRotationMatrix());
    e.pose.translation = Eigen::Vector3d(tx, ty, tz);
    if (!traj.empty() && e.index <= traj.back().index)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": frame indices must increase");
    traj.push_back(e);
  }
  return traj;
}

}  // namespace photoloss
