#include "bfm/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bfm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* type) {
  throw std::invalid_argument("config: key '" + key + "': cannot parse '" + value +
                              "' as " + type);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) bad_value(key, v, "integer");
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, v, "integer");
  } catch (const std::out_of_range&) {
    bad_value(key, v, "integer");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) bad_value(key, v, "unsigned integer");
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, v, "unsigned integer");
  } catch (const std::out_of_range&) {
    bad_value(key, v, "unsigned integer");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v, "number");
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, v, "number");
  } catch (const std::out_of_range&) {
    bad_value(key, v, "number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "bool");
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(to_double(key, tok));
  }
  if (out.empty()) bad_value(key, v, "comma-separated numbers");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "run.id") cfg.run_id = v;
  else if (key == "run.out_dir") cfg.out_dir = v;
  else if (key == "run.threads") cfg.threads = to_int(key, v);
  else if (key == "data.kind") cfg.data.kind = dataset_kind_from_string(v);
  else if (key == "data.n_samples") cfg.data.n_samples = to_int(key, v);
  else if (key == "data.n_classes") cfg.data.n_classes = to_int(key, v);
  else if (key == "data.dim") cfg.data.dim = to_int(key, v);
  else if (key == "data.side") cfg.data.side = to_int(key, v);
  else if (key == "data.ring_radius") cfg.data.ring_radius = to_double(key, v);
  else if (key == "data.ring_sigma") cfg.data.ring_sigma = to_double(key, v);
  else if (key == "data.checker_cells") cfg.data.checker_cells = to_int(key, v);
  else if (key == "data.checker_extent") cfg.data.checker_extent = to_double(key, v);
  else if (key == "data.grf_beta") cfg.data.grf_beta = to_double(key, v);
  else if (key == "data.seed") cfg.data.seed = to_u64(key, v);
  else if (key == "model.d_x") cfg.train.dims.d_x = to_int(key, v);
  else if (key == "model.n_classes") cfg.train.dims.n_classes = to_int(key, v);
  else if (key == "model.feature_dim") cfg.train.dims.feature_dim = to_int(key, v);
  else if (key == "model.oracle_dim") cfg.train.dims.oracle_dim = to_int(key, v);
  else if (key == "model.vel_hidden") cfg.train.dims.vel_hidden = to_int(key, v);
  else if (key == "model.vel_layers") cfg.train.dims.vel_layers = to_int(key, v);
  else if (key == "model.align_hidden") cfg.train.dims.align_hidden = to_int(key, v);
  else if (key == "model.align_layers") cfg.train.dims.align_layers = to_int(key, v);
  else if (key == "model.proj_hidden") cfg.train.dims.proj_hidden = to_int(key, v);
  else if (key == "model.frn_hidden") cfg.train.dims.frn_hidden = to_int(key, v);
  else if (key == "model.frn_layers") cfg.train.dims.frn_layers = to_int(key, v);
  else if (key == "model.oracle_hidden") cfg.train.dims.oracle_hidden = to_int(key, v);
  else if (key == "model.oracle_seed") cfg.train.oracle_seed = to_u64(key, v);
  else if (key == "train.batch_size") cfg.train.batch_size = to_int(key, v);
  else if (key == "train.iterations") cfg.train.iterations = to_int(key, v);
  else if (key == "train.lambda") cfg.train.lambda_align = to_double(key, v);
  else if (key == "train.lr") cfg.train.lr = to_double(key, v);
  else if (key == "train.weight_decay") cfg.train.weight_decay = to_double(key, v);
  else if (key == "train.seed") cfg.train.seed = to_u64(key, v);
  else if (key == "train.m_segments") cfg.train.M = to_int(key, v);
  else if (key == "train.label_drop_prob") cfg.train.label_drop_prob = to_double(key, v);
  else if (key == "train.use_semfeat") cfg.train.use_semfeat = to_bool(key, v);
  else if (key == "train.frn_residual") cfg.train.frn_residual = to_bool(key, v);
  else if (key == "sample.steps_per_segment") cfg.sample.steps_per_segment = to_int(key, v);
  else if (key == "sample.guidance_w") cfg.sample.guidance.w = to_double(key, v);
  else if (key == "sample.mode") {
    if (v == "full") cfg.sample.mode = SamplerMode::FullAlign;
    else if (v == "frn") cfg.sample.mode = SamplerMode::ResidualApprox;
    else bad_value(key, v, "'full' or 'frn'");
  }
  else if (key == "sample.n_samples") cfg.sample.n_samples = to_int(key, v);
  else if (key == "sample.seed") cfg.sample.seed = to_u64(key, v);
  else if (key == "sample.fixed_label") cfg.sample.fixed_label = to_int(key, v);
  else if (key == "eval.n_projections") cfg.eval.n_projections = to_int(key, v);
  else if (key == "eval.bandwidth") cfg.eval.bandwidth = to_double(key, v);
  else if (key == "eval.seed") cfg.eval.seed = to_u64(key, v);
  else if (key == "analysis.timesteps") cfg.analysis.timesteps = to_double_list(key, v);
  else if (key == "analysis.seed") cfg.analysis.seed = to_u64(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void RunConfig::validate() const {
  train.validate();
  sample.validate();
  data.validate();
  if (threads < 1) throw std::invalid_argument("config: run.threads must be >= 1");
  if (sample.fixed_label >= train.dims.n_classes) {
    throw std::invalid_argument("config: sample.fixed_label outside class range");
  }
  for (double t : analysis.timesteps) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw std::invalid_argument("config: analysis.timesteps must lie in [0, 1]");
    }
  }
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  os << "run.id = " << c.run_id << "\n";
  os << "run.out_dir = " << c.out_dir << "\n";
  os << "run.threads = " << c.threads << "\n";
  os << "data.kind = " << to_string(c.data.kind) << "\n";
  os << "data.n_samples = " << c.data.n_samples << "\n";
  os << "data.n_classes = " << c.data.n_classes << "\n";
  os << "data.dim = " << c.data.dim << "\n";
  os << "data.side = " << c.data.side << "\n";
  os << "data.ring_radius = " << fmt(c.data.ring_radius) << "\n";
  os << "data.ring_sigma = " << fmt(c.data.ring_sigma) << "\n";
  os << "data.checker_cells = " << c.data.checker_cells << "\n";
  os << "data.checker_extent = " << fmt(c.data.checker_extent) << "\n";
  os << "data.grf_beta = " << fmt(c.data.grf_beta) << "\n";
  os << "data.seed = " << c.data.seed << "\n";
  os << "model.d_x = " << c.train.dims.d_x << "\n";
  os << "model.n_classes = " << c.train.dims.n_classes << "\n";
  os << "model.feature_dim = " << c.train.dims.feature_dim << "\n";
  os << "model.oracle_dim = " << c.train.dims.oracle_dim << "\n";
  os << "model.vel_hidden = " << c.train.dims.vel_hidden << "\n";
  os << "model.vel_layers = " << c.train.dims.vel_layers << "\n";
  os << "model.align_hidden = " << c.train.dims.align_hidden << "\n";
  os << "model.align_layers = " << c.train.dims.align_layers << "\n";
  os << "model.proj_hidden = " << c.train.dims.proj_hidden << "\n";
  os << "model.frn_hidden = " << c.train.dims.frn_hidden << "\n";
  os << "model.frn_layers = " << c.train.dims.frn_layers << "\n";
  os << "model.oracle_hidden = " << c.train.dims.oracle_hidden << "\n";
  os << "model.oracle_seed = " << c.train.oracle_seed << "\n";
  os << "train.batch_size = " << c.train.batch_size << "\n";
  os << "train.iterations = " << c.train.iterations << "\n";
  os << "train.lambda = " << fmt(c.train.lambda_align) << "\n";
  os << "train.lr = " << fmt(c.train.lr) << "\n";
  os << "train.weight_decay = " << fmt(c.train.weight_decay) << "\n";
  os << "train.seed = " << c.train.seed << "\n";
  os << "train.m_segments = " << c.train.M << "\n";
  os << "train.label_drop_prob = " << fmt(c.train.label_drop_prob) << "\n";
  os << "train.use_semfeat = " << (c.train.use_semfeat ? "true" : "false") << "\n";
  os << "train.frn_residual = " << (c.train.frn_residual ? "true" : "false") << "\n";
  os << "sample.steps_per_segment = " << c.sample.steps_per_segment << "\n";
  os << "sample.guidance_w = " << fmt(c.sample.guidance.w) << "\n";
  os << "sample.mode = "
     << (c.sample.mode == SamplerMode::FullAlign ? "full" : "frn") << "\n";
  os << "sample.n_samples = " << c.sample.n_samples << "\n";
  os << "sample.seed = " << c.sample.seed << "\n";
  os << "sample.fixed_label = " << c.sample.fixed_label << "\n";
  os << "eval.n_projections = " << c.eval.n_projections << "\n";
  os << "eval.bandwidth = " << fmt(c.eval.bandwidth) << "\n";
  os << "eval.seed = " << c.eval.seed << "\n";
  os << "analysis.timesteps = ";
  for (std::size_t i = 0; i < c.analysis.timesteps.size(); ++i) {
    if (i) os << ",";
    os << fmt(c.analysis.timesteps[i]);
  }
  os << "\n";
  os << "analysis.seed = " << c.analysis.seed << "\n";
  return os.str();
}

bool config_equal(const RunConfig& a, const RunConfig& b) {
  return a.run_id == b.run_id && a.out_dir == b.out_dir && a.threads == b.threads &&
         a.data == b.data && a.train == b.train && a.sample == b.sample &&
         a.eval == b.eval && a.analysis == b.analysis;
}

}  // namespace bfm
