#include "softcam/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swaps");

namespace softcam {
namespace {

constexpr std::int64_t kMaxElements = 1LL << 30;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 8);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

std::vector<NamedTensor> named_parameters(const ModelBundle& model) {
  std::vector<NamedTensor> out;
  for (size_t i = 0; i < model.backbone.size(); ++i) {
    out.push_back({"backbone." + std::to_string(i) + ".kernel", &model.backbone[i].kernel});
    out.push_back({"backbone." + std::to_string(i) + ".bias", &model.backbone[i].bias});
  }
  if (model.head_kind == HeadKind::blackbox) {
    for (size_t i = 0; i < model.blackbox.fc.size(); ++i) {
      out.push_back({"head." + std::to_string(i) + ".weight", &model.blackbox.fc[i].weight});
      out.push_back({"head." + std::to_string(i) + ".bias", &model.blackbox.fc[i].bias});
    }
  } else {
    for (size_t i = 0; i < model.softcam.conv.size(); ++i) {
      out.push_back({"head." + std::to_string(i) + ".kernel", &model.softcam.conv[i].kernel});
      out.push_back({"head." + std::to_string(i) + ".bias", &model.softcam.conv[i].bias});
    }
  }
  return out;
}

std::uint64_t digest_model(const std::string& config_json, const ModelBundle& model) {
  std::uint64_t h = fnv1a64(config_json.data(), config_json.size());
  const std::uint8_t kind = model.head_kind == HeadKind::softcam ? 1 : 0;
  h = fnv1a64(&kind, 1, h);
  const std::uint32_t classes = static_cast<std::uint32_t>(model.num_classes);
  h = fnv1a64(&classes, 4, h);
  for (const auto& [name, tensor] : named_parameters(model)) {
    h = fnv1a64(name.data(), name.size(), h);
    for (int e : tensor->shape()) {
      const std::uint32_t u = static_cast<std::uint32_t>(e);
      h = fnv1a64(&u, 4, h);
    }
    h = fnv1a64(tensor->data(), static_cast<std::size_t>(tensor->size()) * 4, h);
  }
  return h;
}

}  // namespace

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + static_cast<std::size_t>(t.size()) * 4);
  out.insert(out.end(), {'S', 'C', 'T', '1'});
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
  out.insert(out.end(), p, p + static_cast<std::size_t>(t.size()) * 4);
  return out;
}

Tensor tensor_from_bytes(const std::uint8_t* data, std::size_t size) {
  if (size < 8 || std::memcmp(data, "SCT1", 4) != 0)
    throw std::runtime_error("SCT1: bad magic");
  const std::uint32_t rank = get_u32(data + 4);
  if (rank > 8) throw std::runtime_error("SCT1: implausible rank " + std::to_string(rank));
  if (size < 8 + 4ull * rank) throw std::runtime_error("SCT1: truncated header");
  std::vector<int> shape(rank);
  std::int64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t e = get_u32(data + 8 + 4 * i);
    if (e == 0 || e > static_cast<std::uint32_t>(kMaxElements))
      throw std::runtime_error("SCT1: extent overflow (" + std::to_string(e) + ")");
    shape[i] = static_cast<int>(e);
    n *= e;
    if (n > kMaxElements) throw std::runtime_error("SCT1: extent overflow (element count)");
  }
  const std::size_t header = 8 + 4ull * rank;
  if (size != header + static_cast<std::size_t>(n) * 4)
    throw std::runtime_error("SCT1: truncated payload (expected " + std::to_string(n) +
                             " floats)");
  std::vector<float> values(static_cast<std::size_t>(n));
  std::memcpy(values.data(), data + header, static_cast<std::size_t>(n) * 4);
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const std::string& path, const Tensor& t) {
  write_file(path, tensor_to_bytes(t));
}

Tensor load_tensor(const std::string& path) {
  const auto bytes = read_file(path);
  return tensor_from_bytes(bytes.data(), bytes.size());
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_digest(const std::string& path) {
  const auto bytes = read_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::uint64_t model_digest(const ModelBundle& model) {
  return digest_model(model.config.to_json(), model);
}

void save_checkpoint(const std::string& path, const ModelBundle& model,
                     const TrainProvenance& provenance) {
  const std::string config_json = model.config.to_json();
  nlohmann::json prov;
  prov["seed"] = provenance.seed;
  prov["lambda1"] = provenance.lambda1;
  prov["lambda2"] = provenance.lambda2;
  prov["epoch"] = provenance.epoch;
  const std::string prov_json = prov.dump();

  const auto named = named_parameters(model);
  const std::uint64_t digest = digest_model(config_json, model);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'S', 'C', 'M', '1'});
  put_u32(out, 1);  // version
  put_u64(out, digest);
  put_u32(out, static_cast<std::uint32_t>(model.num_classes));
  out.push_back(model.head_kind == HeadKind::softcam ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(config_json.size()));
  out.insert(out.end(), config_json.begin(), config_json.end());
  put_u32(out, static_cast<std::uint32_t>(prov_json.size()));
  out.insert(out.end(), prov_json.begin(), prov_json.end());
  put_u32(out, static_cast<std::uint32_t>(named.size()));

  // index: name, shape, absolute payload offset
  std::size_t index_size = 0;
  for (const auto& [name, tensor] : named)
    index_size += 4 + name.size() + 4 + 4ull * tensor->rank() + 8;
  std::uint64_t offset = out.size() + index_size;
  for (const auto& [name, tensor] : named) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(tensor->rank()));
    for (int e : tensor->shape()) put_u32(out, static_cast<std::uint32_t>(e));
    put_u64(out, offset);
    offset += static_cast<std::uint64_t>(tensor->size()) * 4;
  }
  for (const auto& [name, tensor] : named) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(tensor->data());
    out.insert(out.end(), p, p + static_cast<std::size_t>(tensor->size()) * 4);
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = read_file(path);
  const std::uint8_t* p = bytes.data();
  std::size_t n = bytes.size();
  auto need = [&](std::size_t k, const char* what) {
    if (n < k) throw std::runtime_error(std::string("SCM1: truncated ") + what);
  };
  need(4, "magic");
  if (std::memcmp(p, "SCM1", 4) != 0) throw std::runtime_error("SCM1: bad magic");
  std::size_t pos = 4;
  need(pos + 4 + 8 + 4 + 1, "header");
  const std::uint32_t version = get_u32(p + pos);
  pos += 4;
  if (version != 1) throw std::runtime_error("SCM1: unsupported version");
  const std::uint64_t stored_digest = get_u64(p + pos);
  pos += 8;
  const std::uint32_t num_classes = get_u32(p + pos);
  pos += 4;
  const std::uint8_t head_kind = p[pos++];

  need(pos + 4, "config length");
  const std::uint32_t cfg_len = get_u32(p + pos);
  pos += 4;
  need(pos + cfg_len, "config");
  const std::string config_json(reinterpret_cast<const char*>(p + pos), cfg_len);
  pos += cfg_len;
  need(pos + 4, "provenance length");
  const std::uint32_t prov_len = get_u32(p + pos);
  pos += 4;
  need(pos + prov_len, "provenance");
  const std::string prov_json(reinterpret_cast<const char*>(p + pos), prov_len);
  pos += prov_len;
  need(pos + 4, "tensor count");
  const std::uint32_t count = get_u32(p + pos);
  pos += 4;

  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::uint64_t offset;
  };
  std::vector<Entry> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    need(pos + 4, "index name length");
    const std::uint32_t name_len = get_u32(p + pos);
    pos += 4;
    need(pos + name_len + 4, "index entry");
    Entry e;
    e.name.assign(reinterpret_cast<const char*>(p + pos), name_len);
    pos += name_len;
    const std::uint32_t rank = get_u32(p + pos);
    pos += 4;
    need(pos + 4ull * rank + 8, "index shape");
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.shape.push_back(static_cast<int>(get_u32(p + pos)));
      pos += 4;
    }
    e.offset = get_u64(p + pos);
    pos += 8;
    index.push_back(std::move(e));
  }

  Checkpoint ckpt;
  ckpt.model.config = BackboneConfig::from_json(config_json);
  ckpt.model.head_kind = head_kind == 1 ? HeadKind::softcam : HeadKind::blackbox;
  ckpt.model.num_classes = static_cast<int>(num_classes);
  ckpt.model.seed = ckpt.model.config.seed;

  auto read_tensor = [&](const Entry& e) {
    const std::int64_t sz = shape_product(e.shape);
    if (e.offset + static_cast<std::uint64_t>(sz) * 4 > n)
      throw std::runtime_error("SCM1: tensor payload out of range for " + e.name);
    std::vector<float> values(static_cast<std::size_t>(sz));
    std::memcpy(values.data(), p + e.offset, static_cast<std::size_t>(sz) * 4);
    return Tensor(e.shape, std::move(values));
  };

  for (const Entry& e : index) {
    Tensor t = read_tensor(e);
    const auto dot = e.name.find('.');
    const auto dot2 = e.name.find('.', dot + 1);
    const std::string group = e.name.substr(0, dot);
    const std::size_t idx = std::stoul(e.name.substr(dot + 1, dot2 - dot - 1));
    const std::string field = e.name.substr(dot2 + 1);
    if (group == "backbone") {
      if (ckpt.model.backbone.size() <= idx) ckpt.model.backbone.resize(idx + 1);
      if (field == "kernel")
        ckpt.model.backbone[idx].kernel = std::move(t);
      else
        ckpt.model.backbone[idx].bias = std::move(t);
    } else if (ckpt.model.head_kind == HeadKind::blackbox) {
      if (ckpt.model.blackbox.fc.size() <= idx) ckpt.model.blackbox.fc.resize(idx + 1);
      if (field == "weight")
        ckpt.model.blackbox.fc[idx].weight = std::move(t);
      else
        ckpt.model.blackbox.fc[idx].bias = std::move(t);
    } else {
      if (ckpt.model.softcam.conv.size() <= idx) ckpt.model.softcam.conv.resize(idx + 1);
      if (field == "kernel")
        ckpt.model.softcam.conv[idx].kernel = std::move(t);
      else
        ckpt.model.softcam.conv[idx].bias = std::move(t);
    }
  }
  // backbone conv hyperparameters come from the config
  for (size_t i = 0; i < ckpt.model.backbone.size(); ++i) {
    ckpt.model.backbone[i].stride = ckpt.model.config.blocks[i].stride;
    ckpt.model.backbone[i].padding = ckpt.model.config.blocks[i].padding;
  }
  for (auto& l : ckpt.model.softcam.conv) {
    l.stride = 1;
    l.padding = 0;
  }

  const std::uint64_t actual = digest_model(config_json, ckpt.model);
  if (actual != stored_digest)
    throw std::runtime_error("SCM1: digest mismatch (stored " + std::to_string(stored_digest) +
                             ", computed " + std::to_string(actual) + ")");
  ckpt.digest = stored_digest;

  nlohmann::json prov = nlohmann::json::parse(prov_json);
  ckpt.provenance.seed = prov.at("seed");
  ckpt.provenance.lambda1 = prov.at("lambda1");
  ckpt.provenance.lambda2 = prov.at("lambda2");
  ckpt.provenance.epoch = prov.at("epoch");
  return ckpt;
}

void write_pgm(const std::string& path, const Tensor& gray, float scale) {
  if (gray.rank() != 2) throw std::invalid_argument("write_pgm: need a [H,W] grid");
  const int H = gray.extent(0), W = gray.extent(1);
  std::ostringstream os;
  os << "P5\n" << W << " " << H << "\n255\n";
  std::string header = os.str();
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::int64_t i = 0; i < gray.size(); ++i) {
    const float v = gray[i] * scale;
    out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f)));
  }
  write_file(path, out);
}

Tensor read_pgm(const std::string& path) {
  const auto bytes = read_file(path);
  std::string text(bytes.begin(), bytes.end());
  std::istringstream is(text);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("read_pgm: unsupported PGM header in " + path);
  is.get();  // single whitespace after maxval
  const std::size_t offset = static_cast<std::size_t>(is.tellg());
  if (bytes.size() < offset + static_cast<std::size_t>(w) * h)
    throw std::runtime_error("read_pgm: truncated payload in " + path);
  Tensor out({h, w});
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(bytes[offset + i]);
  return out;
}

void write_saliency_pgm(const std::string& path, const Tensor& map2d) {
  if (map2d.rank() != 2) throw std::invalid_argument("write_saliency_pgm: need a [H,W] grid");
  float amp = 0.0f;
  for (std::int64_t i = 0; i < map2d.size(); ++i)
    amp = std::max(amp, std::fabs(map2d[i]));
  Tensor gray(map2d.shape());
  for (std::int64_t i = 0; i < map2d.size(); ++i) {
    const float v = amp > 0.0f ? map2d[i] / amp : 0.0f;  // [-1, 1], 0 -> mid-gray
    gray[i] = 128.0f + 127.0f * v;
  }
  write_pgm(path, gray);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace softcam
