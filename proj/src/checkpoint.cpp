#include "crowdnav/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace crowdnav {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'N', 'C', 'K', 'P', 'T', '0', '1'};

json layout_json(const ParamLayout& layout) {
  json out = json::array();
  for (const auto& e : layout.entries()) {
    out.push_back({{"name", e.name}, {"rows", e.rows}, {"cols", e.cols}, {"offset", e.offset}});
  }
  return out;
}

json shape_json(const NetworkShape& s) {
  return {{"human_dim", s.human_dim}, {"ego_dim", s.ego_dim}, {"embed", s.embed}, {"attention", s.attention},
          {"trunk", s.trunk}};
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params, const ExperimentConfig& config,
                     const json& seeds) {
  const std::uint64_t hash = config_hash(config);
  const json header = {
      {"format", "crowdnav-checkpoint"},
      {"version", 1},
      {"shape", shape_json(params.shape)},
      {"fixed_action_std", params.fixed_action_std},
      {"n_shared", params.shared.size()},
      {"n_cost", params.cost.size()},
      {"tensors", {{"shared", layout_json(shared_layout(params.shape))}, {"cost", layout_json(cost_layout(params.shape))}}},
      {"seeds", seeds},
      {"config_hash", hex64(hash)},
      {"config", config},
  };
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(params.shared.data()),
            static_cast<std::streamsize>(params.shared.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(params.cost.data()),
            static_cast<std::streamsize>(params.cost.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw LoadError("not a checkpoint: " + path.string());
  std::uint64_t length = 0;
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || length > (1ULL << 30)) throw LoadError("corrupt checkpoint header length");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw LoadError("truncated checkpoint header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    const json& s = header.at("shape");
    NetworkShape& shape = ck.params.shape;
    shape.human_dim = s.at("human_dim").get<int>();
    shape.ego_dim = s.at("ego_dim").get<int>();
    shape.embed = s.at("embed").get<int>();
    shape.attention = s.at("attention").get<int>();
    shape.trunk = s.at("trunk").get<int>();
    ck.params.fixed_action_std = header.at("fixed_action_std").get<double>();
    ck.params.shared.resize(header.at("n_shared").get<std::size_t>());
    ck.params.cost.resize(header.at("n_cost").get<std::size_t>());
    ck.seeds = header.value("seeds", json::object());
    ck.config_hash = std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
    if (header.contains("config")) ck.config = header.at("config").get<ExperimentConfig>();
  } catch (const std::exception& e) {
    throw LoadError(std::string("bad checkpoint header: ") + e.what());
  }
  if (ck.params.shape.ego_dim != kEgoFeatureDim || ck.params.shared.size() != shared_layout(ck.params.shape).size() ||
      ck.params.cost.size() != cost_layout(ck.params.shape).size()) {
    throw LoadError("checkpoint parameter counts do not match its shape");
  }

  in.read(reinterpret_cast<char*>(ck.params.shared.data()),
          static_cast<std::streamsize>(ck.params.shared.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(ck.params.cost.data()),
          static_cast<std::streamsize>(ck.params.cost.size() * sizeof(double)));
  if (!in) throw LoadError("truncated checkpoint parameters");
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after checkpoint parameters");
  return ck;
}

void check_compatible(const NetworkParams& params, const ExperimentConfig& config) {
  const NetworkShape expected = NetworkShape::from(config);
  if (!(params.shape == expected)) {
    throw LoadError("checkpoint/config mismatch: network expects human features of width " +
                    std::to_string(params.shape.human_dim) + ", config produces " +
                    std::to_string(expected.human_dim));
  }
}

}  // namespace crowdnav
