#include "fairvec/checkpoint.hpp"

#include "fairvec/error.hpp"
#include "io_util.hpp"

namespace fairvec {
namespace {

constexpr std::string_view kMagic = "FVNN";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string encode_checkpoint(const std::vector<const nn::Sequential*>& nets) {
  std::string out(kMagic);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(nets.size()));
  for (const auto* net : nets) {
    detail::put_u32(out, static_cast<std::uint32_t>(net->size()));
    for (std::size_t i = 0; i < net->size(); ++i) {
      const auto& layer = net->layer(i);
      out.push_back(static_cast<char>(layer.kind()));
      const auto* dense = dynamic_cast<const nn::Dense*>(&layer);
      detail::put_u32(out, dense ? static_cast<std::uint32_t>(dense->in()) : 0);
      detail::put_u32(out, dense ? static_cast<std::uint32_t>(dense->out()) : 0);
      detail::put_f64(out, layer.scalar());
      if (dense) {
        for (double w : dense->weights()) detail::put_f64(out, w);
        for (double b : dense->bias()) detail::put_f64(out, b);
      }
    }
  }
  return out;
}

std::vector<nn::Sequential> decode_checkpoint(std::string_view bytes, const std::string& context) {
  detail::ByteReader in(bytes, context);
  if (in.remaining() < 4 || in.bytes(4) != kMagic) {
    throw InputError(context + ": not a checkpoint (bad magic)");
  }
  const auto version = in.u32();
  if (version != kVersion) {
    throw InputError(context + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.u32();
  std::vector<nn::Sequential> nets;
  for (std::uint32_t n = 0; n < count; ++n) {
    nn::Sequential net;
    const auto layers = in.u32();
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto kind = static_cast<nn::LayerKind>(in.u8());
      const std::size_t fan_in = in.u32();
      const std::size_t fan_out = in.u32();
      const double scalar = in.f64();
      switch (kind) {
        case nn::LayerKind::dense: {
          auto dense = std::make_unique<nn::Dense>(fan_in, fan_out);
          for (auto& w : dense->weights()) w = in.f64();
          for (auto& b : dense->bias()) b = in.f64();
          net.add(std::move(dense));
          break;
        }
        case nn::LayerKind::relu: net.add(std::make_unique<nn::Relu>()); break;
        case nn::LayerKind::dropout: net.add(std::make_unique<nn::Dropout>(scalar, 0)); break;
        case nn::LayerKind::gradient_reversal:
          net.add(std::make_unique<nn::GradientReversal>(scalar));
          break;
        case nn::LayerKind::l2_normalize: net.add(std::make_unique<nn::L2Normalize>()); break;
        default:
          throw InputError(context + ": unknown layer kind " +
                           std::to_string(static_cast<int>(kind)));
      }
    }
    nets.push_back(std::move(net));
  }
  if (in.remaining() != 0) throw InputError(context + ": trailing bytes after the last network");
  return nets;
}

nlohmann::json describe(const nn::Sequential& net) {
  auto layers = nlohmann::json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& layer = net.layer(i);
    nlohmann::json j{{"kind", nn::to_string(layer.kind())}};
    if (const auto* dense = dynamic_cast<const nn::Dense*>(&layer)) {
      j["in"] = dense->in();
      j["out"] = dense->out();
    } else if (layer.kind() == nn::LayerKind::dropout) {
      j["p"] = layer.scalar();
    } else if (layer.kind() == nn::LayerKind::gradient_reversal) {
      j["lambda"] = layer.scalar();
    }
    layers.push_back(j);
  }
  return layers;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void save_checkpoint(const std::vector<const nn::Sequential*>& nets,
                     const std::filesystem::path& path, const nlohmann::json& sidecar) {
  detail::write_file(path, encode_checkpoint(nets));
  detail::write_file(sidecar_path(path), sidecar.dump(2) + "\n");
}

std::vector<nn::Sequential> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  return decode_checkpoint(detail::read_file(path), path.string());
}

}  // namespace fairvec
