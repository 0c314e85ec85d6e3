#include "iconann/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "iconann/error.hpp"
#include "iconann/rng.hpp"

namespace iconann {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'O', 'N', 'C', 'K', 'P', 'T'};

template <typename U>
void put(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::string& path) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw CheckpointError(path + ": truncated header");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

std::uint64_t fnv_bytes(const std::string& bytes) { return fnv1a64(bytes); }

// Floats are stored as their IEEE bit patterns in little-endian order.
std::string pack(const nn::ParamSet<float>& ps) {
  std::string out;
  out.reserve(ps.num_scalars() * 4);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (float f : ps[i].value) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string payload = pack(ckpt.params);
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& p = ckpt.params[i];
    tensors.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}, {"count", p.value.size()}});
    offset += p.value.size();
  }
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"model_type", ckpt.model_type},
                           {"config", ckpt.config},
                           {"extra", ckpt.extra},
                           {"payload_fnv1a64", hex(fnv_bytes(payload))},
                           {"tensors", std::move(tensors)}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + where);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError(where + ": not a checkpoint");
  const auto version = get<std::uint32_t>(in, where);
  if (version == 0 || version > kCheckpointVersion) {
    throw CheckpointError(where + ": unsupported format version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in, where);
  if (header_len > (1ULL << 30)) throw CheckpointError(where + ": implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw CheckpointError(where + ": truncated header");
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": bad header: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.model_type = header.at("model_type").get<std::string>();
    ck.config = header.at("config");
    ck.extra = header.value("extra", nlohmann::json::object());
    if (header.at("payload_fnv1a64").get<std::string>() != hex(fnv_bytes(payload))) {
      throw CheckpointError(where + ": payload checksum mismatch");
    }
    for (const auto& t : header.at("tensors")) {
      const auto idx = ck.params.add(t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>());
      auto& v = ck.params[idx].value;
      const auto off = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      if (count != v.size()) throw CheckpointError(where + ": tensor '" + ck.params[idx].name + "' count/shape mismatch");
      if ((off + count) * 4 > payload.size()) throw CheckpointError(where + ": truncated tensor data");
      for (std::size_t k = 0; k < count; ++k) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[(off + k) * 4 + b])) << (8 * b);
        }
        std::memcpy(&v[k], &bits, 4);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": bad header: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(where + ": " + e.what());
  }
  if (ck.params.num_scalars() * 4 != payload.size()) throw CheckpointError(where + ": payload size mismatch");
  return ck;
}

}  // namespace iconann
