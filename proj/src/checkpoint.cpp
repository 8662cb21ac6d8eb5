#include "adnfm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "adnfm/errors.hpp"

namespace adnfm {

namespace {

void put_u64_be(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::uint64_t get_u64_be(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(in[i]);
  return v;
}

void put_f64_le(std::string& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int shift = 0; shift < 64; shift += 8) out.push_back(static_cast<char>((bits >> shift) & 0xff));
}

double get_f64_le(const char* in) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(in[i]);
  return std::bit_cast<double>(bits);
}

nlohmann::json metadata(const Checkpoint& ckpt) {
  nlohmann::json groups = nlohmann::json::array();
  const auto names = ckpt.params.group_names();
  const auto values = ckpt.params.group_values();
  for (std::size_t i = 0; i < names.size(); ++i) groups.push_back({{"name", names[i]}, {"size", values[i].size()}});
  const HyperParams& h = ckpt.params.hyper;
  return {{"format", "adnfm-checkpoint"},
          {"version", 1},
          {"task", to_string(ckpt.task)},
          {"model",
           {{"kind", to_string(ckpt.params.kind)},
            {"embedding_dim", h.embedding_dim},
            {"hidden_width", h.hidden_width},
            {"depth", h.depth},
            {"attention_dim", h.attention_dim}}},
          {"config_fingerprint", ckpt.config_fingerprint},
          {"metrics", ckpt.metrics},
          {"schema", ckpt.schema->to_json()},
          {"groups", groups}};
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  validate_params(ckpt.params, *ckpt.schema);
  const std::string meta = metadata(ckpt).dump();
  std::string out(kCheckpointMagic);
  put_u64_be(out, meta.size());
  out += meta;
  for (std::span<const double> group : ckpt.params.group_values()) {
    for (double v : group) put_f64_le(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kCheckpointMagic) {
    throw DataError("not a checkpoint (bad magic)");
  }
  const std::uint64_t meta_len = get_u64_be(bytes.substr(8, 8));
  if (meta_len > bytes.size() - 16) throw DataError("checkpoint truncated inside metadata");

  Checkpoint ckpt;
  std::vector<std::pair<std::string, std::size_t>> table;
  try {
    const auto meta = nlohmann::json::parse(bytes.substr(16, meta_len));
    if (meta.at("format") != "adnfm-checkpoint" || meta.at("version") != 1) {
      throw DataError("unsupported checkpoint format");
    }
    ckpt.schema = std::make_shared<const FeatureSchema>(FeatureSchema::from_json(meta.at("schema")));
    ckpt.task = task_from_string(meta.at("task").get<std::string>());
    ckpt.config_fingerprint = meta.at("config_fingerprint").get<std::string>();
    ckpt.metrics = meta.at("metrics");
    const auto& m = meta.at("model");
    HyperParams hyper;
    hyper.embedding_dim = m.at("embedding_dim").get<std::size_t>();
    hyper.hidden_width = m.at("hidden_width").get<std::size_t>();
    hyper.depth = m.at("depth").get<std::size_t>();
    hyper.attention_dim = m.at("attention_dim").get<std::size_t>();
    ckpt.params = zero_params(model_kind_from_string(m.at("kind").get<std::string>()), hyper, *ckpt.schema);
    for (const auto& g : meta.at("groups")) table.emplace_back(g.at("name").get<std::string>(), g.at("size").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
  }

  auto groups = ckpt.params.groups();
  std::size_t total = 0;
  if (groups.size() != table.size()) throw DataError("checkpoint group table disagrees with the model kind");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].name != table[i].first || groups[i].values.size() != table[i].second) {
      throw DataError("checkpoint group '" + table[i].first + "' disagrees with the declared shapes");
    }
    total += table[i].second;
  }
  const std::string_view payload = bytes.substr(16 + meta_len);
  if (payload.size() != total * 8) {
    throw DataError("checkpoint parameter block has " + std::to_string(payload.size()) + " bytes, expected " +
                    std::to_string(total * 8));
  }
  const char* p = payload.data();
  for (const auto& g : groups) {
    for (double& v : g.values) {
      v = get_f64_le(p);
      p += 8;
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace adnfm
