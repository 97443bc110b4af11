#include "sensing/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "core/binary_io.hpp"
#include "core/errors.hpp"
#include "core/parallel.hpp"
#include "sim/simulate.hpp"

namespace lapis::sensing {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::truth: return "truth";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "truth") return Split::truth;
  throw InvalidArgument("unknown split '" + s + "'");
}

std::vector<std::size_t> EnsembleDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < members.size(); ++k)
    if (members[k].split == split) out.push_back(k);
  return out;
}

std::vector<const Member*> EnsembleDataset::training_members() const {
  std::vector<const Member*> out;
  for (const auto& m : members) {
    if (m.split == Split::truth) continue;
    out.push_back(&m);
  }
  return out;
}

const Member& EnsembleDataset::truth() const {
  for (const auto& m : members)
    if (m.split == Split::truth) return m;
  throw StateError("dataset has no ground-truth member");
}

void EnsembleDataset::validate() const {
  if (members.empty()) throw InvalidArgument("dataset has no members");
  const auto& f0 = members.front().field;
  std::size_t truths = 0;
  for (const auto& m : members) {
    m.field.validate();
    if (m.field.frame_size() != f0.frame_size() || m.field.num_frames() != f0.num_frames())
      throw ShapeError("dataset members differ in shape");
    if (m.sensors.rows() != m.field.num_frames() || m.sensors.cols() != layout.p())
      throw ShapeError("sensor series does not match the layout");
    if (m.split == Split::truth) ++truths;
  }
  if (truths > 1) throw InvalidArgument("more than one ground-truth member");
  const auto fm = f0.frame_mask();
  for (auto i : layout.indices) {
    if (i >= f0.frame_size()) throw ShapeError("sensor index outside the frame");
    if (fm[i]) throw InvalidArgument("sensor placed inside a masked cell");
  }
}

EnsembleDataset generate_ensemble(const EnsembleSpec& spec) {
  if (spec.members < 1) throw InvalidArgument("ensemble needs at least one member");
  if (spec.validation >= spec.members && spec.members > 1)
    throw InvalidArgument("validation count must leave at least one training member");
  const std::size_t total = spec.members + (spec.with_truth ? 1 : 0);
  std::vector<sim::SimConfig> configs;
  for (std::size_t k = 0; k < spec.members; ++k) configs.push_back(sim::ensemble_member(spec.base, k, spec.seed));
  if (spec.with_truth) configs.push_back(sim::ground_truth_member(spec.base, spec.seed));
  std::vector<sim::FieldSequence> fields(total);
  parallel_for(total, [&](std::size_t k) { fields[k] = sim::simulate(configs[k]); }, spec.workers);

  EnsembleDataset ds;
  ds.system = sim::to_string(spec.base.system);
  ds.layout = place_sensors(fields[0].frame_size(), spec.sensors, fields[0].frame_mask(), spec.seed ^ 0x9e3779b97f4a7c15ull);
  for (std::size_t k = 0; k < total; ++k) {
    Member m;
    m.field = std::move(fields[k]);
    m.sensors = sample_sensors(m.field, ds.layout).values;
    if (spec.with_truth && k == spec.members)
      m.split = Split::truth;
    else
      m.split = (spec.members > 1 && k >= spec.members - spec.validation) ? Split::val : Split::train;
    ds.members.push_back(std::move(m));
  }
  ds.validate();
  return ds;
}

void normalize_dataset(EnsembleDataset& ds) {
  if (ds.normalized()) throw StateError("dataset is already normalised");
  std::vector<const sim::FieldSequence*> train;
  for (const auto& m : ds.members)
    if (m.split == Split::train) train.push_back(&m.field);
  if (train.empty()) throw InvalidArgument("normalisation needs at least one training member");
  Normalization norm = fit_normalization(train);
  for (auto& m : ds.members) {
    normalize_field(m.field, norm);
    normalize_sensors(m.sensors, ds.layout, m.field.grid_size(), norm);
  }
  ds.normalization = norm;
}

void save_dataset(const EnsembleDataset& ds, const std::string& dir) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const auto& f0 = ds.members.front().field;
  ordered_json j;
  j["format"] = "lapis-dataset";
  j["version"] = 1;
  j["system"] = ds.system;
  j["grid"] = f0.grid_shape;
  j["frames"] = f0.num_frames();
  j["T"] = f0.num_frames() - 1;
  j["K"] = ds.indices(Split::train).size() + ds.indices(Split::val).size();
  j["channels"] = f0.channels;
  j["dt_save"] = f0.dt_save;
  j["frame_size"] = f0.frame_size();
  j["byte_order"] = "little";
  j["dtype"] = "float32";
  std::vector<std::size_t> masked;
  for (std::size_t i = 0; i < f0.mask.size(); ++i)
    if (f0.mask[i]) masked.push_back(i);
  j["masked_cells"] = masked;
  j["layout"] = {{"indices", ds.layout.indices}, {"p", ds.layout.p()}, {"policy", ds.layout.policy},
                 {"seed", ds.layout.seed}};
  if (ds.normalization) {
    j["normalization"] = {{"min", ds.normalization->min}, {"max", ds.normalization->max}};
  } else {
    j["normalization"] = nullptr;
  }
  ordered_json members = ordered_json::array();
  for (std::size_t k = 0; k < ds.members.size(); ++k) {
    const auto& m = ds.members[k];
    const std::string fields = "member_" + std::to_string(k) + "_fields.bin";
    const std::string sensors = "member_" + std::to_string(k) + "_sensors.bin";
    write_f32((fs::path(dir) / fields).string(), m.field.frames.storage());
    write_f32((fs::path(dir) / sensors).string(), m.sensors.storage());
    ordered_json mj;
    mj["index"] = k;
    mj["split"] = to_string(m.split);
    mj["system"] = m.field.provenance.system;
    mj["seed"] = m.field.provenance.seed;
    mj["parameters"] = m.field.provenance.parameters;
    mj["fields"] = fields;
    mj["fields_shape"] = {m.field.num_frames(), m.field.frame_size()};
    mj["sensors"] = sensors;
    mj["sensors_shape"] = {m.sensors.rows(), m.sensors.cols()};
    members.push_back(mj);
  }
  j["members"] = members;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in " + dir);
}

EnsembleDataset load_dataset(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw IoError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  try {
    if (j.at("byte_order") != "little" || j.at("dtype") != "float32") throw IoError("unsupported array encoding");
    EnsembleDataset ds;
    ds.system = j.at("system").get<std::string>();
    ds.layout.indices = j.at("layout").at("indices").get<std::vector<std::size_t>>();
    ds.layout.policy = j.at("layout").at("policy").get<std::string>();
    ds.layout.seed = j.at("layout").at("seed").get<std::uint64_t>();
    if (!j.at("normalization").is_null()) {
      Normalization n;
      n.min = j["normalization"].at("min").get<std::vector<double>>();
      n.max = j["normalization"].at("max").get<std::vector<double>>();
      ds.normalization = n;
    }
    const auto grid = j.at("grid").get<std::vector<std::size_t>>();
    const auto channels = j.at("channels").get<std::vector<std::string>>();
    const double dt_save = j.at("dt_save").get<double>();
    std::size_t g = 1;
    for (auto d : grid) g *= d;
    std::vector<std::uint8_t> mask;
    const auto masked = j.at("masked_cells").get<std::vector<std::size_t>>();
    if (!masked.empty()) {
      mask.assign(g, 0);
      for (auto i : masked) mask.at(i) = 1;
    }
    for (const auto& mj : j.at("members")) {
      Member m;
      m.split = split_from_string(mj.at("split").get<std::string>());
      const auto fshape = mj.at("fields_shape").get<std::vector<std::size_t>>();
      const auto sshape = mj.at("sensors_shape").get<std::vector<std::size_t>>();
      m.field.frames = Tensor<float>({fshape.at(0), fshape.at(1)},
                                     read_f32((fs::path(dir) / mj.at("fields").get<std::string>()).string(),
                                              fshape[0] * fshape[1]));
      m.sensors = Tensor<float>({sshape.at(0), sshape.at(1)},
                                read_f32((fs::path(dir) / mj.at("sensors").get<std::string>()).string(),
                                         sshape[0] * sshape[1]));
      m.field.grid_shape = grid;
      m.field.channels = channels;
      m.field.dt_save = dt_save;
      m.field.mask = mask;
      m.field.provenance.system = mj.at("system").get<std::string>();
      m.field.provenance.seed = mj.at("seed").get<std::uint64_t>();
      m.field.provenance.parameters = mj.at("parameters").get<std::map<std::string, double>>();
      ds.members.push_back(std::move(m));
    }
    ds.validate();
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid manifest " + manifest.string() + ": " + e.what());
  }
}

}  // namespace lapis::sensing
