#include "damext/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace damext {

bool operator==(const Raster& a, const Raster& b) {
  return a.width == b.width && a.height == b.height && a.channels == b.channels &&
         (a.data == b.data).all();
}

bool operator==(const LabelMask& a, const LabelMask& b) {
  return a.width == b.width && a.height == b.height && a.arity == b.arity &&
         (a.values == b.values).all();
}

void quantize(Raster& r) {
  r.data = (r.data * 255.0).round().cwiseMax(0.0).cwiseMin(255.0) / 255.0;
}

namespace {

// Reads one whitespace-delimited token, honoring '#' comments per the netpbm
// header grammar.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    } else {
      ch = in.get();
    }
  }
  if (ch == EOF) return false;
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return !tok.empty();
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  PnmHeader h;
  std::string tok;
  if (!next_token(in, tok)) {
    throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                        "empty or unreadable header: " + path.string());
  }
  h.magic = tok;
  auto read_int = [&](int& out) {
    if (!next_token(in, tok)) {
      throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                          "header ended early: " + path.string());
    }
    try {
      std::size_t pos = 0;
      out = std::stoi(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                          "non-numeric header field '" + tok + "': " + path.string());
    }
  };
  read_int(h.width);
  read_int(h.height);
  read_int(h.maxval);
  if (h.width <= 0 || h.height <= 0) {
    throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                        "non-positive dimensions: " + path.string());
  }
  return h;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t count,
                                       const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw RasterIoError(RasterIoError::Kind::TruncatedPayload,
                        "payload shorter than header promises: " + path.string());
  }
  return buf;
}

}  // namespace

void write_raster(const Raster& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P6\n" << r.width << " " << r.height << "\n255\n";
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double v = std::clamp(r.data[i], 0.0, 1.0);
    buf[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Raster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P6") {
    throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                        "expected P6 raster, got '" + h.magic + "': " + path.string());
  }
  if (h.maxval != 255) {
    throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                        "raster maxval must be 255: " + path.string());
  }
  Raster r(h.width, h.height, 3);
  const auto buf = read_payload(in, static_cast<std::size_t>(r.size()), path);
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    r.data[i] = buf[static_cast<std::size_t>(i)] / 255.0;
  }
  return r;
}

void write_mask(const LabelMask& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P5\n" << m.width << " " << m.height << "\n" << (m.arity - 1) << "\n";
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(m.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

LabelMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P5") {
    throw RasterIoError(RasterIoError::Kind::MalformedHeader,
                        "expected P5 mask, got '" + h.magic + "': " + path.string());
  }
  if (h.maxval != 1 && h.maxval != 2) {
    throw RasterIoError(RasterIoError::Kind::ArityMismatch,
                        "mask maxval must be 1 or 2: " + path.string());
  }
  LabelMask m(h.width, h.height, h.maxval + 1);
  const auto buf =
      read_payload(in, static_cast<std::size_t>(m.size()), path);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (buf[static_cast<std::size_t>(i)] > h.maxval) {
      throw RasterIoError(RasterIoError::Kind::ArityMismatch,
                          "pixel value exceeds declared arity: " + path.string());
    }
    m.values[i] = buf[static_cast<std::size_t>(i)];
  }
  return m;
}

Raster crop(const Raster& r, int r0, int c0, int r1, int c1) {
  Raster out(c1 - c0 + 1, r1 - r0 + 1, r.channels);
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      for (int ch = 0; ch < r.channels; ++ch) {
        out.at(row - r0, col - c0, ch) = r.at(row, col, ch);
      }
    }
  }
  return out;
}

Raster resize_bilinear(const Raster& r, int out_w, int out_h) {
  Raster out(out_w, out_h, r.channels);
  const double sr = static_cast<double>(r.height) / out_h;
  const double sc = static_cast<double>(r.width) / out_w;
  for (int row = 0; row < out_h; ++row) {
    const double src_r = std::clamp((row + 0.5) * sr - 0.5, 0.0, r.height - 1.0);
    const int r0 = static_cast<int>(std::floor(src_r));
    const int r1 = std::min(r0 + 1, r.height - 1);
    const double fr = src_r - r0;
    for (int col = 0; col < out_w; ++col) {
      const double src_c = std::clamp((col + 0.5) * sc - 0.5, 0.0, r.width - 1.0);
      const int c0 = static_cast<int>(std::floor(src_c));
      const int c1 = std::min(c0 + 1, r.width - 1);
      const double fc = src_c - c0;
      for (int ch = 0; ch < r.channels; ++ch) {
        const double top = (1.0 - fc) * r.at(r0, c0, ch) + fc * r.at(r0, c1, ch);
        const double bot = (1.0 - fc) * r.at(r1, c0, ch) + fc * r.at(r1, c1, ch);
        out.at(row, col, ch) = (1.0 - fr) * top + fr * bot;
      }
    }
  }
  return out;
}

}  // namespace damext
