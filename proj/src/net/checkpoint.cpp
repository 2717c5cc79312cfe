#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "calfront/errors.hpp"
#include "calfront/net.hpp"
#include "calfront/raster_io.hpp"

namespace calfront::net {

namespace {

constexpr std::string_view kMagic = "CALFRONTCKPT1\n";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = ckpt.config;
  header["meta"] = {{"epoch", ckpt.meta.epoch},
                    {"best_val_iou", ckpt.meta.best_val_iou},
                    {"seed", ckpt.meta.seed},
                    {"rng_state", ckpt.meta.rng_state}};
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.tensors) {
    index.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  header["tensors"] = index;
  const std::string head = header.dump();

  std::string out(kMagic);
  put_u64(out, head.size());
  out += head;
  out.reserve(out.size() + offset);
  for (const auto& [name, m] : ckpt.tensors)
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < kMagic.size() + 8 || bytes.compare(0, kMagic.size(), kMagic) != 0)
    throw DataError(path.string() + " is not a checkpoint (bad magic)");
  std::uint64_t head_len = 0;
  std::memcpy(&head_len, bytes.data() + kMagic.size(), 8);
  const std::size_t head_start = kMagic.size() + 8;
  if (head_len > bytes.size() - head_start) throw DataError(path.string() + ": truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(head_start, head_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  const std::size_t data_start = head_start + head_len;

  Checkpoint c;
  try {
    c.config = header.at("config").get<NetConfig>();
    const auto& meta = header.at("meta");
    c.meta.epoch = meta.at("epoch").get<int>();
    c.meta.best_val_iou = meta.at("best_val_iou").get<double>();
    c.meta.seed = meta.at("seed").get<std::uint64_t>();
    c.meta.rng_state = meta.at("rng_state").get<std::string>();
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const std::size_t nbytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (data_start + offset + nbytes > bytes.size())
        throw DataError(path.string() + ": tensor '" + t.at("name").get<std::string>() + "' runs past end of file");
      Eigen::MatrixXd m(rows, cols);
      std::memcpy(m.data(), bytes.data() + data_start + offset, nbytes);
      c.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  return c;
}

}  // namespace calfront::net
