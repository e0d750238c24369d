#include "ghostcert/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ghostcert/error.hpp"

namespace ghostcert {

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string next_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

int parse_positive(const std::string& tok, const std::filesystem::path& path, std::size_t pos) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(path.string() + ": bad header field '" + tok + "'", pos);
}

}  // namespace

Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const std::string magic = next_token(buf, pos);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError(path.string() + ": unsupported netpbm magic '" + magic + "'", 0);
  }
  const int width = parse_positive(next_token(buf, pos), path, pos);
  const int height = parse_positive(next_token(buf, pos), path, pos);
  const int maxval = parse_positive(next_token(buf, pos), path, pos);
  if (maxval > 255) throw FormatError(path.string() + ": 16-bit netpbm is not supported", pos);
  ++pos;  // single whitespace after maxval
  const Shape shape{height, width, channels};
  if (buf.size() < pos + shape.size()) {
    throw FormatError(path.string() + ": truncated pixel data, expected " + std::to_string(shape.size()) +
                          " bytes, found " + std::to_string(buf.size() > pos ? buf.size() - pos : 0),
                      buf.size());
  }
  Image img(shape);
  for (std::size_t i = 0; i < shape.size(); ++i) img[i] = static_cast<double>(buf[pos + i]) / maxval;
  return img;
}

void write_netpbm(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ShapeError("netpbm output needs 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ghostcert
