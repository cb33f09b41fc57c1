#include "voxfuse/io/calibration.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <vector>

namespace voxfuse {
namespace {

struct Tokenizer {
  explicit Tokenizer(std::istream& in) : in_(in) {}

  double number(const char* what) {
    skip_space();
    std::string tok;
    while (in_.peek() != EOF && !std::isspace(in_.peek())) tok.push_back(static_cast<char>(in_.get()));
    if (tok.empty()) {
      throw CalibrationError(std::string("unexpected end of file while reading ") + what, line_);
    }
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) {
      throw CalibrationError(std::string("non-numeric token '") + tok + "' while reading " + what,
                             line_);
    }
    return v;
  }

  int line() const { return line_; }

 private:
  void skip_space() {
    while (in_.peek() != EOF && std::isspace(in_.peek())) {
      if (in_.get() == '\n') ++line_;
    }
  }

  std::istream& in_;
  int line_ = 1;
};

Intrinsics read_intrinsics(Tokenizer& t, const char* camera) {
  Intrinsics intr;
  intr.width = static_cast<int>(t.number(camera));
  intr.height = static_cast<int>(t.number(camera));
  intr.fx = t.number(camera);
  intr.fy = t.number(camera);
  intr.cx = t.number(camera);
  intr.cy = t.number(camera);
  if (!intr.valid()) {
    throw CalibrationError(std::string("invalid intrinsics for ") + camera, t.line());
  }
  return intr;
}

}  // namespace

Calibration parse_calibration(std::istream& in) {
  Tokenizer t(in);
  Calibration c;
  c.rgb = read_intrinsics(t, "rgb camera (block 1)");
  c.depth = read_intrinsics(t, "depth camera (block 2)");

  Mat3d r;
  Vec3d tr;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) r(row, col) = t.number("extrinsic (block 3)");
    tr(row) = t.number("extrinsic (block 3)");
  }
  Pose extrinsic(r, tr);
  // Files carry limited precision; accept and repair small drift.
  if (extrinsic.orthonormality_error() > 1e-3) {
    throw CalibrationError("extrinsic rotation is not orthonormal", t.line());
  }
  c.rgb_to_depth = Pose(orthonormalize(r), tr);

  c.disparity.a = t.number("disparity scalars (block 4)");
  c.disparity.b = t.number("disparity scalars (block 4)");
  return c;
}

Calibration parse_calibration_text(const std::string& text) {
  std::istringstream in(text);
  return parse_calibration(in);
}

Calibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("cannot open calibration file: " + path, 0);
  return parse_calibration(in);
}

std::string serialize_calibration(const Calibration& c) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  auto cam = [&](const Intrinsics& i) {
    out << i.width << " " << i.height << "\n"
        << num(i.fx) << " " << num(i.fy) << "\n"
        << num(i.cx) << " " << num(i.cy) << "\n\n";
  };
  cam(c.rgb);
  cam(c.depth);
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) out << num(c.rgb_to_depth.rotation()(row, col)) << " ";
    out << num(c.rgb_to_depth.translation()(row)) << "\n";
  }
  out << "\n" << num(c.disparity.a) << " " << num(c.disparity.b) << "\n";
  return out.str();
}

}  // namespace voxfuse
