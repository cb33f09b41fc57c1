#include "voxfuse/io/sequence.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <regex>

namespace voxfuse {

SequenceScan scan_sequence_dir(const std::string& dir) {
  static const std::regex pattern(R"(^(.*?)(\d+)\.(ppm|pgm)$)", std::regex::icase);
  struct Slot {
    std::string rgb;
    std::string disparity;
  };
  std::map<int, Slot> slots;
  for (const auto& de : std::filesystem::directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const std::string name = de.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) continue;
    const int index = std::stoi(m[2].str());
    std::string ext = m[3].str();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == "ppm") {
      slots[index].rgb = de.path().string();
    } else {
      slots[index].disparity = de.path().string();
    }
  }
  SequenceScan scan;
  for (const auto& [index, slot] : slots) {
    if (slot.disparity.empty()) {
      ++scan.rgb_only;
      continue;
    }
    if (slot.rgb.empty()) ++scan.disparity_only;
    scan.frames.push_back(FramePair{index, slot.rgb, slot.disparity});
  }
  return scan;
}

}  // namespace voxfuse
