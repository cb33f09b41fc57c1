#include "voxfuse/io/pnm.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace voxfuse {
namespace {

// Reads one PNM header token, skipping whitespace and '#' comments.
int header_int(std::istream& in, const char* what) {
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw PnmError(std::string("unexpected end of header before ") + what);
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      break;
    }
  }
  int value = 0;
  bool any = false;
  while (std::isdigit(in.peek())) {
    value = value * 10 + (in.get() - '0');
    any = true;
  }
  if (!any) throw PnmError(std::string("malformed header field: ") + what);
  return value;
}

void read_header(std::istream& in, const char* magic, int expected_maxval, int& w, int& h) {
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != magic[0] || m1 != magic[1]) {
    throw PnmError(std::string("bad magic, expected ") + magic);
  }
  w = header_int(in, "width");
  h = header_int(in, "height");
  const int maxval = header_int(in, "maxval");
  if (maxval != expected_maxval) {
    throw PnmError("unsupported maxval " + std::to_string(maxval) + ", expected " +
                   std::to_string(expected_maxval));
  }
  in.get();  // single whitespace byte before the raster
  if (w <= 0 || h <= 0) throw PnmError("non-positive image dimensions");
}

void read_payload(std::istream& in, std::vector<std::uint8_t>& buf) {
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw PnmError("truncated raster data");
  }
}

}  // namespace

Image2D<std::uint16_t> read_pgm16(std::istream& in) {
  int w = 0, h = 0;
  read_header(in, "P5", 65535, w, h);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 2);
  read_payload(in, buf);
  Image2D<std::uint16_t> img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.pixels()[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return img;
}

void write_pgm16(std::ostream& out, const Image2D<std::uint16_t>& img) {
  out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<std::uint8_t> buf(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[2 * i] = static_cast<std::uint8_t>(img.pixels()[i] >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(img.pixels()[i] & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image2D<Vec3u8> read_ppm(std::istream& in) {
  int w = 0, h = 0;
  read_header(in, "P6", 255, w, h);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
  read_payload(in, buf);
  Image2D<Vec3u8> img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.pixels()[i] = Vec3u8(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  }
  return img;
}

void write_ppm(std::ostream& out, const Image2D<Vec3u8>& img) {
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<std::uint8_t> buf(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[3 * i] = img.pixels()[i].x();
    buf[3 * i + 1] = img.pixels()[i].y();
    buf[3 * i + 2] = img.pixels()[i].z();
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

namespace {
template <typename T, typename Reader>
T load_file(const std::string& path, Reader reader) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PnmError("cannot open " + path);
  return reader(in);
}
template <typename T, typename Writer>
void save_file(const std::string& path, const T& img, Writer writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PnmError("cannot write " + path);
  writer(out, img);
}
}  // namespace

Image2D<std::uint16_t> load_pgm16(const std::string& path) {
  return load_file<Image2D<std::uint16_t>>(path, [](std::istream& in) { return read_pgm16(in); });
}
void save_pgm16(const std::string& path, const Image2D<std::uint16_t>& img) {
  save_file(path, img, [](std::ostream& out, const Image2D<std::uint16_t>& i) { write_pgm16(out, i); });
}
Image2D<Vec3u8> load_ppm(const std::string& path) {
  return load_file<Image2D<Vec3u8>>(path, [](std::istream& in) { return read_ppm(in); });
}
void save_ppm(const std::string& path, const Image2D<Vec3u8>& img) {
  save_file(path, img, [](std::ostream& out, const Image2D<Vec3u8>& i) { write_ppm(out, i); });
}

}  // namespace voxfuse
