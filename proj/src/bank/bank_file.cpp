#include "famix/bank/bank_file.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <iterator>

#include "famix/error.hpp"

namespace famix {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'F', 'A', 'M', 'I', 'X', 'S', 'B', '\0'};
constexpr std::uint32_t kMaxStringBytes = 1u << 16;
constexpr std::uint32_t kMaxChannels = 1u << 16;
constexpr std::uint32_t kMaxClasses = 1u << 16;

class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    if (s.size() > kMaxStringBytes) {
      throw InvalidInputError(fmt::format("string of {} bytes exceeds the bank limit", s.size()));
    }
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  std::span<const std::uint8_t> bytes(std::size_t n, const std::string& field) {
    need(n, field);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const std::string& field) { return bytes(1, field)[0]; }
  std::uint32_t u32(const std::string& field) {
    auto b = bytes(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const std::string& field) {
    auto b = bytes(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  float f32(const std::string& field) { return std::bit_cast<float>(u32(field)); }
  double f64(const std::string& field) { return std::bit_cast<double>(u64(field)); }
  std::string str(const std::string& field) {
    const std::uint32_t n = u32(field + " length");
    if (n > kMaxStringBytes) {
      throw LoadError(fmt::format("bank file: corrupted length {} for {}", n, field));
    }
    auto b = bytes(n, field);
    return std::string(b.begin(), b.end());
  }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (n > remaining()) {
      throw LoadError(fmt::format("bank file: truncated while reading {} at offset {}", field, pos_));
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t bank_checksum(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; banks stay far below 4 GiB but chunk anyway.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_bank(const StyleBank& bank) {
  bank.validate();
  const auto& md = bank.metadata();
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kBankFormatVersion);
  w.u32(static_cast<std::uint32_t>(bank.channels()));
  w.u32(static_cast<std::uint32_t>(bank.num_classes()));
  w.u8(static_cast<std::uint8_t>(md.kind));
  w.u8(static_cast<std::uint8_t>(md.source));
  w.str(md.prompt_set_id);
  w.u32(md.pin_steps);
  w.f64(md.pin_step_size);
  w.u64(md.seed);
  w.u32(md.patches_m);
  w.f64(md.snr_db);
  for (int k = 0; k < bank.num_classes(); ++k) {
    w.str(bank.class_names()[static_cast<std::size_t>(k)]);
    const auto& entries = bank.entries(k);
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      for (double v : e.style.mu) w.f32(static_cast<float>(v));
      for (double v : e.style.sigma) w.f32(static_cast<float>(v));
      w.str(e.prompt);
      w.u64(e.source_patch_id);
      w.f64(e.final_cosine_distance);
      w.u32(e.iterations);
    }
  }
  const std::uint32_t crc = bank_checksum(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

StyleBank decode_bank(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.bytes(kMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw LoadError("bank file: bad magic (not a style bank)");
  }
  const std::uint32_t version = r.u32("format_version");
  if (version != kBankFormatVersion) {
    throw LoadError(fmt::format("bank file: format_version {} not recognized (expected {})",
                                version, kBankFormatVersion));
  }
  const std::uint32_t channels = r.u32("channels");
  if (channels == 0 || channels > kMaxChannels) {
    throw LoadError(fmt::format("bank file: channels {} out of range", channels));
  }
  const std::uint32_t num_classes = r.u32("num_classes");
  if (num_classes == 0 || num_classes > kMaxClasses) {
    throw LoadError(fmt::format("bank file: num_classes {} out of range", num_classes));
  }
  MiningMetadata md;
  const std::uint8_t kind = r.u8("kind");
  if (kind > static_cast<std::uint8_t>(BankKind::kGlobal)) {
    throw LoadError(fmt::format("bank file: kind {} not recognized", kind));
  }
  md.kind = static_cast<BankKind>(kind);
  if (md.kind == BankKind::kGlobal && num_classes != 1) {
    throw LoadError(fmt::format("bank file: global bank declares {} classes", num_classes));
  }
  const std::uint8_t source = r.u8("source");
  if (source > static_cast<std::uint8_t>(StyleSource::kSource)) {
    throw LoadError(fmt::format("bank file: source {} not recognized", source));
  }
  md.source = static_cast<StyleSource>(source);
  md.prompt_set_id = r.str("prompt_set_id");
  md.pin_steps = r.u32("pin_steps");
  md.pin_step_size = r.f64("pin_step_size");
  md.seed = r.u64("seed");
  md.patches_m = r.u32("patches_m");
  md.snr_db = r.f64("snr_db");

  std::vector<std::string> names;
  std::vector<std::vector<StyleEntry>> per_class(num_classes);
  const std::size_t entry_min_bytes = 8ull * channels + 4 + 8 + 8 + 4;
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    const std::string field = fmt::format("class {}", k);
    names.push_back(r.str(field + " name"));
    const std::uint32_t count = r.u32(field + " entry count");
    if (static_cast<std::size_t>(count) * entry_min_bytes > r.remaining()) {
      throw LoadError(fmt::format("bank file: corrupted length, {} declares {} entries but only {} "
                                  "bytes remain",
                                  field, count, r.remaining()));
    }
    auto& list = per_class[k];
    list.reserve(count);
    for (std::uint32_t e = 0; e < count; ++e) {
      const std::string ef = fmt::format("class {} entry {}", k, e);
      StyleEntry entry;
      entry.style.mu.resize(channels);
      entry.style.sigma.resize(channels);
      for (auto& v : entry.style.mu) v = r.f32(ef + " mu");
      for (auto& v : entry.style.sigma) v = r.f32(ef + " sigma");
      entry.prompt = r.str(ef + " prompt");
      entry.source_patch_id = r.u64(ef + " patch id");
      entry.final_cosine_distance = r.f64(ef + " distance");
      entry.iterations = r.u32(ef + " iterations");
      list.push_back(std::move(entry));
    }
  }
  const std::size_t payload = r.offset();
  const std::uint32_t stored_crc = r.u32("checksum");
  if (r.remaining() != 0) {
    throw LoadError(fmt::format("bank file: {} trailing bytes after checksum", r.remaining()));
  }
  if (bank_checksum(bytes.first(payload)) != stored_crc) {
    throw LoadError("bank file: checksum mismatch (file corrupted)");
  }

  // Semantic validation, reported per entry.
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    for (std::size_t e = 0; e < per_class[k].size(); ++e) {
      const auto& s = per_class[k][e].style;
      for (std::uint32_t c = 0; c < channels; ++c) {
        if (!std::isfinite(s.mu[c]) || !std::isfinite(s.sigma[c])) {
          throw LoadError(fmt::format("bank file: class {} entry {} channel {} is not finite", k, e,
                                      c));
        }
        if (s.sigma[c] < kEpsilonSigma) {
          throw LoadError(fmt::format("bank file: class {} entry {} sigma[{}] = {} below epsilon {}",
                                      k, e, c, s.sigma[c], kEpsilonSigma));
        }
      }
    }
  }

  StyleBank bank(static_cast<int>(channels), std::move(names), md);
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    for (auto& entry : per_class[k]) bank.add(static_cast<int>(k), std::move(entry));
  }
  return bank;
}

void save_bank(const StyleBank& bank, const std::filesystem::path& path) {
  const auto bytes = encode_bank(bank);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

StyleBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open bank file {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_bank(bytes);
  } catch (const LoadError& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<BankHeaderField> describe_bank_header(std::span<const std::uint8_t> bytes) {
  std::vector<BankHeaderField> fields;
  ByteReader r(bytes);
  auto fixed = [&](const char* name, std::size_t size) {
    fields.push_back({name, r.offset(), size});
    r.bytes(size, name);
  };
  fixed("magic", kMagic.size());
  fixed("format_version", 4);
  fixed("channels", 4);
  fixed("num_classes", 4);
  fixed("kind", 1);
  fixed("source", 1);
  const std::size_t len_off = r.offset();
  const std::uint32_t n = r.u32("prompt_set_id length");
  fields.push_back({"prompt_set_id length", len_off, 4});
  if (n > 0) fixed("prompt_set_id", n);
  fixed("pin_steps", 4);
  fixed("pin_step_size", 8);
  fixed("seed", 8);
  fixed("patches_m", 4);
  fixed("snr_db", 8);
  return fields;
}

}  // namespace famix
