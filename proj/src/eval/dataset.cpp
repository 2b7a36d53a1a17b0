#include "famix/eval/dataset.hpp"

#include <cctype>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "famix/error.hpp"

namespace famix {

namespace {

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const std::filesystem::path& path) {
  PnmHeader h;
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(fmt::format("{}: malformed netpbm header", path.string()));
  }
  if (h.width < 1 || h.height < 1 || h.maxval != 255) {
    throw IoError(fmt::format("{}: unsupported netpbm geometry {}x{} maxval {}", path.string(),
                              h.width, h.height, h.maxval));
  }
  return h;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n,
                                       const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw IoError(fmt::format("{}: truncated pixel data", path.string()));
  }
  return buf;
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open image {}", path.string()));
  const auto h = read_pnm_header(in, path);
  if (h.magic != "P6") throw IoError(fmt::format("{}: expected a P6 image", path.string()));
  RgbImage img{h.height, h.width, {}};
  img.data = read_payload(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  return img;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write image {}", path.string()));
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

LabelMap read_label_pgm(const std::filesystem::path& path, int num_classes, int ignore_index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open label map {}", path.string()));
  const auto h = read_pnm_header(in, path);
  if (h.magic != "P5") throw IoError(fmt::format("{}: expected a P5 label map", path.string()));
  const auto raw = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
  std::vector<std::int32_t> data(raw.begin(), raw.end());
  LabelMap labels(h.height, h.width, num_classes, std::move(data), ignore_index);
  labels.validate();
  return labels;
}

void write_label_pgm(const LabelMap& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write label map {}", path.string()));
  out << "P5\n" << labels.width() << ' ' << labels.height() << "\n255\n";
  for (auto v : labels.data()) {
    if (v < 0 || v > 255) throw InvalidInputError(fmt::format("label {} does not fit 8 bits", v));
    out.put(static_cast<char>(static_cast<std::uint8_t>(v)));
  }
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open manifest {}", path.string()));
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string image, label, split;
    if (!(ss >> image)) continue;
    if (!(ss >> label >> split)) {
      throw ConfigError(fmt::format("{}:{}: expected 'image label split'", path.string(), lineno));
    }
    ManifestEntry e;
    e.image = std::filesystem::path(image).is_absolute() ? std::filesystem::path(image) : base / image;
    e.label = std::filesystem::path(label).is_absolute() ? std::filesystem::path(label) : base / label;
    e.split = split;
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write manifest {}", path.string()));
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    out << std::filesystem::relative(e.image, base).generic_string() << ' '
        << std::filesystem::relative(e.label, base).generic_string() << ' ' << e.split << '\n';
  }
}

std::vector<Sample> load_split(const std::filesystem::path& manifest, const std::string& split,
                               int num_classes, int ignore_index) {
  std::vector<Sample> samples;
  for (const auto& e : load_manifest(manifest)) {
    if (!split.empty() && e.split != split) continue;
    Sample s{read_ppm(e.image), read_label_pgm(e.label, num_classes, ignore_index)};
    if (s.image.height != s.labels.height() || s.image.width != s.labels.width()) {
      throw ShapeError(fmt::format("{}: image {}x{} vs labels {}x{}", e.image.string(),
                                   s.image.height, s.image.width, s.labels.height(),
                                   s.labels.width()));
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw ConfigError(fmt::format("{} has no entries for split '{}'", manifest.string(), split));
  }
  return samples;
}

}  // namespace famix
