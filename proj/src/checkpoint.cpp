#include "segtrus/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "segtrus/errors.hpp"

namespace segtrus {

namespace {

constexpr char kMagic[4] = {'V', 'R', '1', '9'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xFF);
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back((v >> (8 * i)) & 0xFF);
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(buf, bits);
}

void put_string(std::vector<std::uint8_t>& buf, const std::string& s) {
  put_u64(buf, s.size());
  buf.insert(buf.end(), s.begin(), s.end());
}

void put_tensor(std::vector<std::uint8_t>& buf, const std::string& name,
                const Tensor4& t) {
  put_string(buf, name);
  for (std::size_t d : t.dims) put_u64(buf, d);
  for (double v : t.data) put_f64(buf, v);
}

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t len = u64();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  Tensor4 tensor(std::string* name) {
    *name = str();
    std::array<std::size_t, 4> dims;
    for (auto& d : dims) d = u64();
    const std::size_t count = dims[0] * dims[1] * dims[2] * dims[3];
    need(count * 8);
    Tensor4 t(dims[0], dims[1], dims[2], dims[3]);
    for (double& v : t.data) v = f64();
    return t;
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) {
      throw FormatError("checkpoint: truncated payload at byte " +
                        std::to_string(pos_));
    }
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::vector<std::uint8_t> payload;
  put_string(payload, to_json(ck.config));
  put_u64(payload, ck.epoch);
  put_u64(payload, ck.params.params.size());
  for (const auto& p : ck.params.params) put_tensor(payload, p.name, p.value);
  put_u64(payload, ck.params.buffers.size());
  for (const auto& b : ck.params.buffers) put_tensor(payload, b.name, b.value);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("save_checkpoint: cannot open '" + path.string() + "'");
  }
  out.write(kMagic, 4);
  std::vector<std::uint8_t> head;
  put_u32(head, kVersion);
  out.write(reinterpret_cast<const char*>(head.data()),
            static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  std::vector<std::uint8_t> tail;
  put_u32(tail, crc_of(payload.data(), payload.size()));
  out.write(reinterpret_cast<const char*>(tail.data()),
            static_cast<std::streamsize>(tail.size()));
  if (!out) {
    throw FormatError("save_checkpoint: short write to '" + path.string() +
                      "'");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("load_checkpoint: cannot open '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  if (bytes.size() < 12) {
    throw FormatError("load_checkpoint: file too small");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("load_checkpoint: bad magic, not a VR19 checkpoint");
  }
  Reader header(bytes.data() + 4, bytes.size() - 4);
  const std::uint32_t version = header.u32();
  if (version != kVersion) {
    throw FormatError("load_checkpoint: unsupported version " +
                      std::to_string(version));
  }
  const std::uint8_t* payload = bytes.data() + 8;
  const std::size_t payload_len = bytes.size() - 12;
  std::uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) {
    stored_crc |= std::uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
  }
  if (crc_of(payload, payload_len) != stored_crc) {
    throw FormatError("load_checkpoint: CRC mismatch, file is corrupt");
  }

  Reader r(payload, payload_len);
  Checkpoint ck;
  ck.config = config_from_json(r.str());
  ck.epoch = r.u64();
  const std::uint64_t n_params = r.u64();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    ParamEntry e;
    e.value = r.tensor(&e.name);
    e.grad = Tensor4(e.value.dims[0], e.value.dims[1], e.value.dims[2],
                     e.value.dims[3]);
    e.momentum = e.grad;
    ck.params.params.push_back(std::move(e));
  }
  const std::uint64_t n_buffers = r.u64();
  for (std::uint64_t i = 0; i < n_buffers; ++i) {
    BufferEntry e;
    e.value = r.tensor(&e.name);
    ck.params.buffers.push_back(std::move(e));
  }
  if (!r.done()) {
    throw FormatError("load_checkpoint: trailing bytes in payload");
  }
  return ck;
}

}  // namespace segtrus
