#include "bfm/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace bfm {

namespace {

constexpr char kMagic[4] = {'B', 'F', 'M', 'C'};
constexpr std::uint16_t kVersion = 1;

nlohmann::json spec_to_json(const MlpSpec& s) {
  return {{"in_dim", s.in_dim},     {"hidden_dim", s.hidden_dim},
          {"out_dim", s.out_dim},   {"n_layers", s.n_layers},
          {"cond_dim", s.cond_dim}, {"n_labels", s.n_labels},
          {"feature_dim", s.feature_dim}};
}

MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.in_dim = j.at("in_dim").get<int>();
  s.hidden_dim = j.at("hidden_dim").get<int>();
  s.out_dim = j.at("out_dim").get<int>();
  s.n_layers = j.at("n_layers").get<int>();
  s.cond_dim = j.at("cond_dim").get<int>();
  s.n_labels = j.at("n_labels").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  return s;
}

nlohmann::json dims_to_json(const NetDims& d) {
  return {{"d_x", d.d_x},
          {"n_classes", d.n_classes},
          {"feature_dim", d.feature_dim},
          {"oracle_dim", d.oracle_dim},
          {"vel_hidden", d.vel_hidden},
          {"vel_layers", d.vel_layers},
          {"align_hidden", d.align_hidden},
          {"align_layers", d.align_layers},
          {"proj_hidden", d.proj_hidden},
          {"frn_hidden", d.frn_hidden},
          {"frn_layers", d.frn_layers},
          {"oracle_hidden", d.oracle_hidden}};
}

NetDims dims_from_json(const nlohmann::json& j) {
  NetDims d;
  d.d_x = j.at("d_x").get<int>();
  d.n_classes = j.at("n_classes").get<int>();
  d.feature_dim = j.at("feature_dim").get<int>();
  d.oracle_dim = j.at("oracle_dim").get<int>();
  d.vel_hidden = j.at("vel_hidden").get<int>();
  d.vel_layers = j.at("vel_layers").get<int>();
  d.align_hidden = j.at("align_hidden").get<int>();
  d.align_layers = j.at("align_layers").get<int>();
  d.proj_hidden = j.at("proj_hidden").get<int>();
  d.frn_hidden = j.at("frn_hidden").get<int>();
  d.frn_layers = j.at("frn_layers").get<int>();
  d.oracle_hidden = j.at("oracle_hidden").get<int>();
  return d;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"lambda_align", c.lambda_align},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"M", c.M},
          {"label_drop_prob", c.label_drop_prob},
          {"use_semfeat", c.use_semfeat},
          {"frn_residual", c.frn_residual},
          {"dims", dims_to_json(c.dims)},
          {"oracle_seed", c.oracle_seed},
          {"threads", c.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.lambda_align = j.at("lambda_align").get<double>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.M = j.at("M").get<int>();
  c.label_drop_prob = j.at("label_drop_prob").get<double>();
  c.use_semfeat = j.at("use_semfeat").get<bool>();
  c.frn_residual = j.at("frn_residual").get<bool>();
  c.dims = dims_from_json(j.at("dims"));
  c.oracle_seed = j.at("oracle_seed").get<std::uint64_t>();
  c.threads = j.at("threads").get<int>();
  return c;
}

struct NetRef {
  std::string name;
  const ParamSet* params;
};

std::vector<NetRef> net_list(const ModelBundle& b) {
  std::vector<NetRef> nets;
  for (int m = 1; m <= b.M(); ++m) {
    nets.push_back({"v" + std::to_string(m), &b.velocity_blocks[m - 1]});
  }
  if (b.use_semfeat) {
    nets.push_back({"f_phi", &b.align_net});
    nets.push_back({"h_psi", &b.proj_head});
  }
  if (b.has_frn()) nets.push_back({"f_eta", &b.frn});
  nets.push_back({"oracle", &b.oracle});
  return nets;
}

void append_f32(std::string& out, const Vec& v) {
  for (double x : v) {
    float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

Vec read_f32(const std::string& bytes, std::size_t& pos, std::size_t count,
             const char* what) {
  if (bytes.size() - pos < count * 4) {
    throw format_error(std::string("load_checkpoint: truncated array ") + what);
  }
  Vec v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + i * 4 + b]))
              << (8 * b);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    v[i] = static_cast<double>(f);
  }
  pos += count * 4;
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto nets = net_list(ck.bundle);

  nlohmann::json manifest = nlohmann::json::array();
  std::string arrays;
  for (const auto& n : nets) {
    manifest.push_back({{"name", n.name},
                        {"spec", spec_to_json(n.params->spec)},
                        {"seed", n.params->seed},
                        {"len", n.params->flat.size()}});
    append_f32(arrays, n.params->flat);
  }

  nlohmann::json optj = nlohmann::json::array();
  for (const auto& o : ck.opt) {
    optj.push_back({{"lr", o.lr},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"eps", o.eps},
                    {"weight_decay", o.weight_decay},
                    {"step", o.step},
                    {"len", o.m.size()}});
    append_f32(arrays, o.m);
    append_f32(arrays, o.v);
  }

  nlohmann::json header = {{"stage", ck.stage},
                           {"iteration", ck.iteration},
                           {"rng", ck.rng_state},
                           {"config", train_config_to_json(ck.config)},
                           {"M", ck.bundle.M()},
                           {"use_semfeat", ck.bundle.use_semfeat},
                           {"oracle_seed", ck.bundle.oracle_seed},
                           {"dims", dims_to_json(ck.bundle.dims)},
                           {"nets", manifest},
                           {"opt", optj}};
  const std::string hs = header.dump();

  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion & 0xff));
  out.push_back(static_cast<char>((kVersion >> 8) & 0xff));
  const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((hlen >> (8 * i)) & 0xff));
  out += hs;
  out += arrays;

  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(hs.data()), static_cast<uInt>(hs.size()));
  crc = crc32(crc, reinterpret_cast<const Bytef*>(arrays.data()),
              static_cast<uInt>(arrays.size()));
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint32_t>(crc) >> (8 * i)) & 0xff));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw format_error("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw format_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("load_checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw format_error("load_checkpoint: bad magic in " + path);
  }
  std::size_t pos = 4;
  const std::uint16_t version = static_cast<std::uint8_t>(bytes[pos]) |
                                (static_cast<std::uint8_t>(bytes[pos + 1]) << 8);
  pos += 2;
  if (version != kVersion) {
    throw format_error("load_checkpoint: unsupported version " + std::to_string(version));
  }
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i) {
    hlen |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + i])) << (8 * i);
  }
  pos += 4;
  if (bytes.size() - pos < hlen + 4) throw format_error("load_checkpoint: truncated header");
  const std::string hs = bytes.substr(pos, hlen);
  pos += hlen;

  // trailing CRC covers header + arrays
  if (bytes.size() < 4) throw format_error("load_checkpoint: truncated file");
  const std::size_t arrays_len = bytes.size() - pos - 4;
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(hs.data()), static_cast<uInt>(hs.size()));
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos),
              static_cast<uInt>(arrays_len));
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(
                  static_cast<std::uint8_t>(bytes[bytes.size() - 4 + i]))
              << (8 * i);
  }
  if (static_cast<std::uint32_t>(crc) != stored) {
    throw format_error("load_checkpoint: checksum mismatch");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("load_checkpoint: bad header json: ") + e.what());
  }

  Checkpoint ck;
  ck.stage = header.at("stage").get<int>();
  ck.iteration = header.at("iteration").get<std::int64_t>();
  ck.rng_state = header.at("rng").get<std::string>();
  ck.config = train_config_from_json(header.at("config"));

  ModelBundle& b = ck.bundle;
  const int M = header.at("M").get<int>();
  b.schedule = make_uniform_schedule(M);
  b.use_semfeat = header.at("use_semfeat").get<bool>();
  b.oracle_seed = header.at("oracle_seed").get<std::uint64_t>();
  b.dims = dims_from_json(header.at("dims"));

  for (const auto& nj : header.at("nets")) {
    ParamSet p;
    p.spec = spec_from_json(nj.at("spec"));
    p.seed = nj.at("seed").get<std::uint64_t>();
    const std::size_t len = nj.at("len").get<std::size_t>();
    if (param_layout(p.spec).total != len) {
      throw format_error("load_checkpoint: array length disagrees with spec for " +
                         nj.at("name").get<std::string>());
    }
    p.flat = read_f32(bytes, pos, len, nj.at("name").get<std::string>().c_str());
    const std::string name = nj.at("name").get<std::string>();
    if (name.size() >= 2 && name[0] == 'v') {
      b.velocity_blocks.push_back(std::move(p));
    } else if (name == "f_phi") {
      b.align_net = std::move(p);
    } else if (name == "h_psi") {
      b.proj_head = std::move(p);
    } else if (name == "f_eta") {
      b.frn = std::move(p);
    } else if (name == "oracle") {
      b.oracle = std::move(p);
    } else {
      throw format_error("load_checkpoint: unknown net name " + name);
    }
  }
  if (static_cast<int>(b.velocity_blocks.size()) != M) {
    throw format_error("load_checkpoint: velocity block count disagrees with M");
  }

  for (const auto& oj : header.at("opt")) {
    OptState o;
    o.lr = oj.at("lr").get<double>();
    o.beta1 = oj.at("beta1").get<double>();
    o.beta2 = oj.at("beta2").get<double>();
    o.eps = oj.at("eps").get<double>();
    o.weight_decay = oj.at("weight_decay").get<double>();
    o.step = oj.at("step").get<std::int64_t>();
    const std::size_t len = oj.at("len").get<std::size_t>();
    o.m = read_f32(bytes, pos, len, "opt.m");
    o.v = read_f32(bytes, pos, len, "opt.v");
    ck.opt.push_back(std::move(o));
  }

  if (pos != bytes.size() - 4) {
    throw format_error("load_checkpoint: trailing bytes after declared arrays");
  }
  return ck;
}

}  // namespace bfm
