#include "foro/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include "foro/error.hpp"

namespace foro {
namespace {

constexpr std::array<char, 8> kFeatureMagic{'F', 'O', 'R', 'O', 'F', 'E', 'A', 'T'};
constexpr std::array<char, 8> kCheckpointMagic{'F', 'O', 'R', 'O', 'C', 'K', 'P', 'T'};

class ByteWriter {
 public:
  void magic(const std::array<char, 8>& m) {
    for (char c : m) bytes_.push_back(static_cast<std::uint8_t>(c));
  }
  template <typename T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, ErrorCode code) : bytes_(bytes), code_(code) {}

  bool magic(const std::array<char, 8>& m) {
    need(m.size());
    const bool ok = std::memcmp(bytes_.data() + pos_, m.data(), m.size()) == 0;
    pos_ += m.size();
    return ok;
  }
  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const { throw Error(code_, what); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail("truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorCode code_;
};

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kMissingFile, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kMissingFile, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::kMissingFile, "rename to " + path.string() + ": " + ec.message());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kChecksumMismatch, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

Matrix FeatureFile::features() const {
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

std::vector<std::uint8_t> encode_feature_file(const FeatureFile& file) {
  if (file.values.size() != static_cast<std::size_t>(file.rows) * file.cols || file.labels.size() != file.rows) {
    throw Error(ErrorCode::kShapeMismatch, "feature file payload does not match header");
  }
  ByteWriter w;
  w.magic(kFeatureMagic);
  w.put(kFeatureFileVersion);
  w.put(file.rows);
  w.put(file.cols);
  for (float v : file.values) w.put(v);
  for (std::uint32_t label : file.labels) w.put(label);
  return w.take();
}

FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kCorruptFeatureFile);
  if (!r.magic(kFeatureMagic)) r.fail("bad magic");
  if (const auto version = r.get<std::uint16_t>(); version != kFeatureFileVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  FeatureFile f;
  f.rows = r.get<std::uint32_t>();
  f.cols = r.get<std::uint32_t>();
  const std::size_t count = static_cast<std::size_t>(f.rows) * f.cols;
  if (r.remaining() != count * sizeof(float) + static_cast<std::size_t>(f.rows) * sizeof(std::uint32_t)) {
    r.fail("payload length does not match n=" + std::to_string(f.rows) + " d=" + std::to_string(f.cols));
  }
  f.values.resize(count);
  for (float& v : f.values) {
    v = r.get<float>();
    if (!std::isfinite(v)) r.fail("non-finite feature value");
  }
  f.labels.resize(f.rows);
  for (std::uint32_t& label : f.labels) label = r.get<std::uint32_t>();
  return f;
}

std::vector<std::uint8_t> encode_checkpoint(const Kem& kem, const Classifier& clf) {
  if (kem.dim() != clf.dim()) throw Error(ErrorCode::kShapeMismatch, "KEM and classifier dims differ");
  ByteWriter w;
  w.magic(kCheckpointMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(kem.dim()));
  w.put(static_cast<std::uint32_t>(clf.class_count()));
  for (std::uint32_t id : clf.class_ids) w.put(id);
  w.put(kem.gamma);
  w.put(kem.samples_seen);
  for (double v : kem.r.data()) w.put(v);
  for (double v : clf.w.data()) w.put(v);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kCorruptCheckpoint);
  if (!r.magic(kCheckpointMagic)) r.fail("bad magic");
  if (const auto version = r.get<std::uint16_t>(); version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  const auto m = r.get<std::uint32_t>();
  const auto c = r.get<std::uint32_t>();
  if (m == 0) r.fail("M = 0");
  if (r.remaining() / sizeof(std::uint32_t) < c) r.fail("class table runs past the end of the file");
  Checkpoint ck;
  ck.classifier.class_ids.resize(c);
  for (auto& id : ck.classifier.class_ids) id = r.get<std::uint32_t>();
  ck.kem.gamma = r.get<double>();
  ck.kem.samples_seen = r.get<std::uint64_t>();
  if (!(ck.kem.gamma > 0.0)) r.fail("gamma must be positive");
  const std::size_t expected = (static_cast<std::size_t>(m) * m + static_cast<std::size_t>(m) * c) * sizeof(double);
  if (r.remaining() != expected) r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                                        std::to_string(expected));
  ck.kem.r = Matrix(m, m);
  for (double& v : ck.kem.r.data()) v = r.get<double>();
  ck.classifier.w = Matrix(m, c);
  for (double& v : ck.classifier.w.data()) v = r.get<double>();
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Kem& kem, const Classifier& clf) {
  write_file_atomic(path, encode_checkpoint(kem, clf));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  return decode_checkpoint(read_file(path));
}

}  // namespace foro
