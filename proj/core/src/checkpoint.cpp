#include "ice/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ice/error.hpp"

namespace ice {
namespace {

constexpr const char* kFormat = "ice-checkpoint-v1";

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t parse_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw InvalidArgument("checkpoint manifest: missing key '" + key + "'");
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("checkpoint manifest: bad integer for '" + key + "'");
  }
  return v;
}

}  // namespace

void write_parameter_blob(std::ostream& out, const MlpParameters& params) {
  for (const auto block : params.blocks()) {
    for (double v : block) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      std::array<char, 8> bytes{};
      for (std::size_t b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
      out.write(bytes.data(), bytes.size());
    }
  }
}

void read_parameter_blob(std::istream& in, MlpParameters& params) {
  for (auto block : params.blocks()) {
    for (double& v : block) {
      std::array<char, 8> bytes{};
      if (!in.read(bytes.data(), bytes.size())) {
        throw InvalidArgument("checkpoint blob: fewer parameters than the manifest declares");
      }
      std::uint64_t bits = 0;
      for (std::size_t b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
      }
      v = std::bit_cast<double>(bits);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw InvalidArgument("checkpoint blob: more data than the manifest declares");
  }
}

void save_checkpoint(const std::filesystem::path& manifest, const MlpEmbedder& net,
                     const CheckpointMeta& meta) {
  const MlpShape& shape = net.shape();
  std::filesystem::path blob = manifest;
  blob.replace_extension(".bin");

  std::ofstream m(manifest, std::ios::binary);
  if (!m) throw IoError("cannot write checkpoint manifest " + manifest.string());
  m << "format = " << kFormat << '\n'
    << "in_dim = " << shape.in_dim << '\n'
    << "hidden_dim = " << shape.hidden_dim << '\n'
    << "embed_dim = " << shape.embed_dim << '\n'
    << "layer.hidden.weights = " << shape.in_dim << 'x' << shape.hidden_dim << '\n'
    << "layer.hidden.bias = " << shape.hidden_dim << '\n'
    << "layer.output.weights = " << shape.hidden_dim << 'x' << shape.embed_dim << '\n'
    << "layer.output.bias = " << shape.embed_dim << '\n'
    << "param_count = " << net.params().count() << '\n'
    << "param_file = " << blob.filename().string() << '\n'
    << "byte_order = little-endian\n"
    << "seed = " << meta.seed << '\n'
    << "iteration = " << meta.iteration << '\n';
  for (const auto& [key, value] : meta.hyper) m << key << " = " << value << '\n';
  if (!m) throw IoError("failed writing " + manifest.string());

  std::ofstream b(blob, std::ios::binary);
  if (!b) throw IoError("cannot write checkpoint blob " + blob.string());
  write_parameter_blob(b, net.params());
  if (!b) throw IoError("failed writing " + blob.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream m(manifest);
  if (!m) throw IoError("cannot read checkpoint manifest " + manifest.string());

  static const std::array<std::string_view, 13> kFixed = {
      "format", "in_dim", "hidden_dim", "embed_dim", "layer.hidden.weights", "layer.hidden.bias",
      "layer.output.weights", "layer.output.bias", "param_count", "param_file", "byte_order",
      "seed", "iteration"};

  std::map<std::string, std::string> kv;
  CheckpointMeta meta;
  std::string line;
  while (std::getline(m, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw InvalidArgument("checkpoint manifest: bad line '" + line + "'");
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (std::find(kFixed.begin(), kFixed.end(), key) == kFixed.end()) {
      meta.hyper.emplace_back(key, value);
    }
    kv[std::move(key)] = std::move(value);
  }
  if (kv["format"] != kFormat) throw InvalidArgument("checkpoint manifest: unknown format");
  if (kv["byte_order"] != "little-endian") {
    throw InvalidArgument("checkpoint manifest: unsupported byte order");
  }

  const MlpShape shape{parse_u64(kv, "in_dim"), parse_u64(kv, "hidden_dim"),
                       parse_u64(kv, "embed_dim")};
  meta.seed = parse_u64(kv, "seed");
  meta.iteration = parse_u64(kv, "iteration");

  MlpEmbedder net(shape);
  if (parse_u64(kv, "param_count") != net.params().count()) {
    throw InvalidArgument("checkpoint manifest: param_count disagrees with layer shapes");
  }
  const auto blob = manifest.parent_path() / kv["param_file"];
  std::ifstream b(blob, std::ios::binary);
  if (!b) throw IoError("cannot read checkpoint blob " + blob.string());
  MlpParameters params = MlpParameters::zeros(shape);
  read_parameter_blob(b, params);
  return {MlpEmbedder(std::move(params)), std::move(meta)};
}

}  // namespace ice
