#include "pipeline/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "core/errors.hpp"

namespace lapis::pipeline {

namespace pt = boost::property_tree;

std::string to_string(TemporalKind k) { return k == TemporalKind::seq2seq ? "seq2seq" : "ar"; }

TemporalKind temporal_kind_from_string(const std::string& s) {
  if (s == "seq2seq") return TemporalKind::seq2seq;
  if (s == "ar") return TemporalKind::ar;
  throw InvalidArgument("unknown temporal model '" + s + "' (expected seq2seq or ar)");
}

ExperimentConfig ExperimentConfig::defaults(sim::System system) {
  ExperimentConfig c;
  c.sim = sim::SimConfig::defaults(system);
  switch (system) {
    case sim::System::ks2d:
      c.ensemble = 8;
      c.sensors = 3;
      break;
    case sim::System::kolmogorov2d:
      c.ensemble = 15;
      c.sensors = 8;
      break;
    case sim::System::kvs:
      c.ensemble = 8;
      c.sensors = 5;
      c.mode = shred::Mode::seq2seq;
      c.shred_hidden = 80;
      c.obs_fraction = 0.10;
      break;
    case sim::System::linear_toy:
      c.ensemble = 8;
      c.sensors = 8;
      c.mode = shred::Mode::seq2seq;
      break;
  }
  return c;
}

std::size_t ExperimentConfig::observed_frames() const {
  if (obs_fraction > 0) {
    const auto n = static_cast<std::size_t>(std::lround(obs_fraction * static_cast<double>(frames())));
    return std::clamp<std::size_t>(n, 1, frames());
  }
  return window_frames;
}

shred::ShredConfig ExperimentConfig::shred_config(std::size_t output_dim) const {
  auto c = shred::ShredConfig::defaults(mode, sensors, output_dim);
  c.hidden = shred_hidden;
  if (shred_layers > 0) c.layers = shred_layers;
  c.lag = lag;
  c.decoder_hidden = decoder_hidden;
  return c;
}

void ExperimentConfig::validate() const {
  sim.validate();
  if (ensemble < 2) throw InvalidArgument("the ensemble needs at least two members (training and validation)");
  if (validation == 0 || validation >= ensemble)
    throw InvalidArgument("validation count must be in [1, ensemble - 1]");
  if (sensors == 0) throw InvalidArgument("sensor count must be positive");
  if (obs_fraction < 0 || obs_fraction > 1) throw InvalidArgument("obs_fraction must lie in (0, 1]");
  if (window_frames == 0) throw InvalidArgument("window_frames must be at least 1");
  if (observed_frames() > frames()) throw InvalidArgument("observed window is longer than the trajectory");
  if (lag == 0) throw InvalidArgument("lag must be at least 1");
  if (shred_hidden == 0 || temporal_hidden == 0) throw InvalidArgument("hidden sizes must be positive");
  if (temporal_batch == 0) throw InvalidArgument("temporal batch must be at least 1");
  if (ar_window == 0) throw InvalidArgument("ar_window must be at least 1");
  if (temporal == TemporalKind::ar && ar_window > observed_frames())
    throw InvalidArgument("ar_window exceeds the observed window");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(v, &used);
    } else {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw InvalidArgument("invalid value '" + v + "' for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("invalid boolean '" + v + "' for " + key);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

template <typename T>
std::vector<T> split(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  return out;
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field number(T ExperimentConfig::*m) {
  return {[m](const ExperimentConfig& c) {
            if constexpr (std::is_same_v<T, double>) return fmt(c.*m);
            else return std::to_string(c.*m);
          },
          [m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = parse_number<T>(k, v); }};
}

template <typename T>
Field sim_number(T sim::SimConfig::*m) {
  return {[m](const ExperimentConfig& c) {
            if constexpr (std::is_same_v<T, double>) return fmt(c.sim.*m);
            else return std::to_string(c.sim.*m);
          },
          [m](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, long>) {
              try {
                c.sim.*m = std::stol(v);
              } catch (const std::exception&) {
                throw InvalidArgument("invalid value '" + v + "' for " + k);
              }
            } else c.sim.*m = parse_number<T>(k, v);
          }};
}

Field sim_flag(bool sim::SimConfig::*m) {
  return {[m](const ExperimentConfig& c) { return std::string(c.sim.*m ? "true" : "false"); },
          [m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.*m = parse_bool(k, v); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    using C = ExperimentConfig;
    using S = sim::SimConfig;
    std::vector<std::pair<std::string, Field>> t;
    t.push_back({"experiment.system",
                 {[](const C& c) { return sim::to_string(c.sim.system); },
                  [](C& c, const std::string&, const std::string& v) { c.sim.system = sim::system_from_string(v); }}});
    t.push_back({"experiment.ensemble", number(&C::ensemble)});
    t.push_back({"experiment.validation", number(&C::validation)});
    t.push_back({"experiment.sensors", number(&C::sensors)});
    t.push_back({"experiment.seed", number(&C::seed)});
    t.push_back({"shred.mode",
                 {[](const C& c) { return shred::to_string(c.mode); },
                  [](C& c, const std::string&, const std::string& v) { c.mode = shred::mode_from_string(v); }}});
    t.push_back({"shred.lag", number(&C::lag)});
    t.push_back({"shred.hidden", number(&C::shred_hidden)});
    t.push_back({"shred.layers", number(&C::shred_layers)});
    t.push_back({"shred.decoder_hidden",
                 {[](const C& c) { return join(c.decoder_hidden); },
                  [](C& c, const std::string& k, const std::string& v) {
                    c.decoder_hidden = split<std::size_t>(k, v);
                  }}});
    t.push_back({"shred.epochs", number(&C::shred_epochs)});
    t.push_back({"shred.patience", number(&C::shred_patience)});
    t.push_back({"shred.lr", number(&C::shred_lr)});
    t.push_back({"shred.batch", number(&C::shred_batch)});
    t.push_back({"temporal.kind",
                 {[](const C& c) { return to_string(c.temporal); },
                  [](C& c, const std::string&, const std::string& v) { c.temporal = temporal_kind_from_string(v); }}});
    t.push_back({"temporal.direction",
                 {[](const C& c) { return temporal::to_string(c.direction); },
                  [](C& c, const std::string&, const std::string& v) {
                    c.direction = temporal::direction_from_string(v);
                  }}});
    t.push_back({"temporal.window_frames", number(&C::window_frames)});
    t.push_back({"temporal.obs_fraction", number(&C::obs_fraction)});
    t.push_back({"temporal.padding", number(&C::padding)});
    t.push_back({"temporal.hidden", number(&C::temporal_hidden)});
    t.push_back({"temporal.epochs", number(&C::temporal_epochs)});
    t.push_back({"temporal.patience", number(&C::temporal_patience)});
    t.push_back({"temporal.batch", number(&C::temporal_batch)});
    t.push_back({"temporal.lr", number(&C::temporal_lr)});
    t.push_back({"temporal.lambda_recon", number(&C::lambda_recon)});
    t.push_back({"temporal.lambda_shape", number(&C::lambda_shape)});
    t.push_back({"temporal.ar_window", number(&C::ar_window)});
    t.push_back({"temporal.horizon", number(&C::horizon)});
    t.push_back({"temporal.subsequences", number(&C::subsequences)});
    t.push_back({"simulation.nx", sim_number(&S::nx)});
    t.push_back({"simulation.ny", sim_number(&S::ny)});
    t.push_back({"simulation.domain", sim_number(&S::domain)});
    t.push_back({"simulation.dt", sim_number(&S::dt)});
    t.push_back({"simulation.save_stride", sim_number(&S::save_stride)});
    t.push_back({"simulation.burnin_steps", sim_number(&S::burnin_steps)});
    t.push_back({"simulation.num_frames", sim_number(&S::num_frames)});
    t.push_back({"simulation.epsilon", sim_number(&S::epsilon)});
    t.push_back({"simulation.nonlinear", sim_flag(&S::nonlinear)});
    t.push_back({"simulation.forcing", sim_flag(&S::forcing)});
    t.push_back({"simulation.re", sim_number(&S::re)});
    t.push_back({"simulation.k0", sim_number(&S::k0)});
    t.push_back({"simulation.u_inf", sim_number(&S::u_inf)});
    t.push_back({"simulation.radius", sim_number(&S::radius)});
    t.push_back({"simulation.cylinder_x", sim_number(&S::cylinder_x)});
    t.push_back({"simulation.cylinder_y", sim_number(&S::cylinder_y)});
    t.push_back({"simulation.inlet_modulation", sim_number(&S::inlet_modulation)});
    t.push_back({"simulation.spinup_steps", sim_number(&S::spinup_steps)});
    t.push_back({"simulation.coarsen", sim_number(&S::coarsen)});
    t.push_back({"simulation.obstacle", sim_flag(&S::obstacle)});
    t.push_back({"simulation.periodic", sim_flag(&S::periodic)});
    t.push_back({"simulation.free_slip_walls", sim_flag(&S::free_slip_walls)});
    t.push_back({"simulation.kick", sim_number(&S::kick)});
    t.push_back({"simulation.gammas",
                 {[](const C& c) { return join(c.sim.gammas); },
                  [](C& c, const std::string& k, const std::string& v) { c.sim.gammas = split<double>(k, v); }}});
    t.push_back({"simulation.probe_x", sim_number(&S::probe_x)});
    t.push_back({"simulation.probe_y", sim_number(&S::probe_y)});
    t.push_back({"simulation.coefficients",
                 {[](const C& c) { return join(c.sim.coefficients); },
                  [](C& c, const std::string& k, const std::string& v) {
                    c.sim.coefficients = split<double>(k, v);
                  }}});
    t.push_back({"simulation.seed", sim_number(&S::seed)});
    return t;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, f] : fields()) {
    if (name == key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw InvalidArgument("unknown configuration key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, f] : fields()) out.emplace_back(name, f.get(*this));
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  sim::System system = sim::System::ks2d;
  if (auto s = tree.get_optional<std::string>("experiment.system")) system = sim::system_from_string(*s);
  ExperimentConfig cfg = ExperimentConfig::defaults(system);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw InvalidArgument("config key '" + section + "' must live inside a section");
    for (const auto& [name, value] : body) cfg.set(section + "." + name, value.data());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  pt::ptree tree;
  for (const auto& [k, v] : cfg.entries()) tree.put(k, v);
  std::ostringstream out;
  pt::write_ini(out, tree);
  return out.str();
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path);
  out << format_config(cfg);
  if (!out) throw IoError("failed writing config " + path);
}

}  // namespace lapis::pipeline
