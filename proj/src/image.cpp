#include "culgen/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "culgen/errors.hpp"

namespace culgen {

namespace {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

// --- PPM / PGM -------------------------------------------------------------

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) continue;
    tok.push_back(static_cast<char>(ch));
    while ((ch = is.peek()) != EOF && !std::isspace(ch) && ch != '#')
      tok.push_back(static_cast<char>(is.get()));
    return tok;
  }
  return tok;
}

Image read_pnm(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::string data(bytes.begin(), bytes.end());
  std::istringstream is(data);
  const std::string magic = next_token(is);
  const bool ascii = (magic == "P2" || magic == "P3");
  const bool binary = (magic == "P5" || magic == "P6");
  if (!ascii && !binary) throw ParseError("unsupported PNM magic '" + magic + "': " + path);
  const int channels = (magic == "P3" || magic == "P6") ? 3 : 1;

  const int w = std::stoi(next_token(is));
  const int h = std::stoi(next_token(is));
  const int maxval = std::stoi(next_token(is));
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw ParseError("bad PNM header in " + path);

  Image img(w, h, channels);
  const size_t n = img.pixels.size();
  if (ascii) {
    for (size_t i = 0; i < n; ++i) {
      const std::string tok = next_token(is);
      if (tok.empty()) throw ParseError("truncated PNM data: " + path);
      img.pixels[i] = static_cast<uint8_t>(std::stoi(tok) * 255 / maxval);
    }
  } else {
    // One whitespace byte separates header from raster.
    const auto pos = static_cast<size_t>(is.tellg()) + 1;
    if (bytes.size() < pos + n) throw ParseError("truncated PNM data: " + path);
    std::memcpy(img.pixels.data(), bytes.data() + pos, n);
    if (maxval != 255)
      for (auto& p : img.pixels) p = static_cast<uint8_t>(p * 255 / maxval);
  }
  return img;
}

// --- PNG ---------------------------------------------------------------

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32be(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
  put_u32be(out, static_cast<uint32_t>(payload.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32be(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

Image read_png(const std::string& path, const std::vector<uint8_t>& bytes) {
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw ParseError("not a PNG file: " + path);

  size_t pos = 8;
  int w = 0, h = 0, bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = get_u32be(bytes.data() + pos);
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const uint8_t* payload = bytes.data() + pos + 8;
    if (pos + 12 + len > bytes.size()) throw ParseError("truncated PNG: " + path);
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = static_cast<int>(get_u32be(payload));
      h = static_cast<int>(get_u32be(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0) throw ParseError("interlaced PNG unsupported: " + path);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0) throw ParseError("bad PNG header: " + path);
  if (bit_depth != 8 || (color_type != 0 && color_type != 2 && color_type != 6))
    throw ParseError("unsupported PNG format (need 8-bit gray/RGB/RGBA): " + path);

  const int src_ch = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
  const size_t stride = static_cast<size_t>(w) * src_ch;
  std::vector<uint8_t> raw(static_cast<size_t>(h) * (stride + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (::uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw ParseError("PNG inflate failed: " + path);

  // Undo per-row filters in place.
  std::vector<uint8_t> scan(static_cast<size_t>(h) * stride);
  for (int y = 0; y < h; ++y) {
    const uint8_t filter = raw[static_cast<size_t>(y) * (stride + 1)];
    const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
    uint8_t* dst = scan.data() + static_cast<size_t>(y) * stride;
    const uint8_t* prev = y > 0 ? scan.data() + static_cast<size_t>(y - 1) * stride : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(src_ch) ? dst[i - src_ch] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= static_cast<size_t>(src_ch)) ? prev[i - src_ch] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw ParseError("bad PNG filter byte: " + path);
      }
      dst[i] = static_cast<uint8_t>(v & 0xff);
    }
  }

  const int out_ch = src_ch == 4 ? 3 : src_ch;
  Image img(w, h, out_ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < out_ch; ++c)
        img.at(x, y, c) = scan[static_cast<size_t>(y) * stride + static_cast<size_t>(x) * src_ch + c];
  return img;
}

}  // namespace

Image read_image(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '2' && bytes[1] <= '6')
    return read_pnm(path, bytes);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P') return read_png(path, bytes);
  throw ParseError("unrecognized image format: " + path);
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os << (img.channels == 1 ? "P5" : "P6") << "\n"
     << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw IoError("write failed: " + path);
}

std::vector<uint8_t> encode_png(const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw InvalidInputError("encode_png: channels must be 1 or 3");
  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height) * (stride + 1));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    const uint8_t* row = img.pixels.data() + static_cast<size_t>(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }
  uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw Error("PNG deflate failed");
  compressed.resize(bound);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(img.width));
  put_u32be(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);           // gray / RGB
  ihdr.push_back(0);                                   // compression
  ihdr.push_back(0);                                   // filter method
  ihdr.push_back(0);                                   // no interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  return out;
}

void write_png(const std::string& path, const Image& img) {
  const auto bytes = encode_png(img);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path);
}

uint32_t crc32_of(const void* data, size_t len) {
  return static_cast<uint32_t>(
      ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

uint32_t crc32_of_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return crc32_of(bytes.data(), bytes.size());
}

}  // namespace culgen
