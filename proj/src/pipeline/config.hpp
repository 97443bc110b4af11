#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shred/shred.hpp"
#include "sim/config.hpp"
#include "temporal/temporal.hpp"

namespace lapis::pipeline {

enum class TemporalKind { seq2seq, ar };

std::string to_string(TemporalKind k);
TemporalKind temporal_kind_from_string(const std::string& s);

/// Everything one experiment needs. Serialised as an INI file with the
/// sections [experiment], [shred], [temporal] and [simulation].
struct ExperimentConfig {
  // experiment
  std::size_t ensemble = 8;     // K simulation members (training + validation)
  std::size_t validation = 1;
  std::size_t sensors = 3;      // p
  std::uint64_t seed = 0;

  // shred
  shred::Mode mode = shred::Mode::frame;
  std::size_t lag = 10;
  std::size_t shred_hidden = 64;
  std::size_t shred_layers = 0;      // 0: mode default (frame 2, seq2seq 1)
  std::vector<std::size_t> decoder_hidden{350, 350};
  std::size_t shred_epochs = 300;
  std::size_t shred_patience = 50;
  double shred_lr = 1e-3;
  std::size_t shred_batch = 64;      // frame mode: frames per step; 0: one member per step

  // temporal
  TemporalKind temporal = TemporalKind::seq2seq;
  temporal::Direction direction = temporal::Direction::backward;
  std::size_t window_frames = 10;   // observed frames, W + 1
  double obs_fraction = 0;          // when > 0, overrides window_frames
  std::size_t padding = 0;          // L; 0 disables padding
  std::size_t temporal_hidden = 64; // d_h^B
  std::size_t temporal_epochs = 300;
  std::size_t temporal_patience = 50;
  std::size_t temporal_batch = 1;
  double temporal_lr = 1e-3;
  double lambda_recon = 1.0;
  double lambda_shape = 0.1;
  std::size_t ar_window = 5;
  std::size_t horizon = 0;          // AR forward: 0 means the rest of the trajectory
  std::size_t subsequences = 0;     // AR only: extra crops per trajectory

  sim::SimConfig sim;

  /// Per-system defaults (mode, sizes, p, K).
  static ExperimentConfig defaults(sim::System system);

  std::size_t frames() const { return sim.num_frames; }
  /// Number of observed frames W + 1 after resolving obs_fraction.
  std::size_t observed_frames() const;
  /// T_out for the seq2seq model.
  std::size_t generated_frames() const { return frames() - observed_frames(); }
  shred::ShredConfig shred_config(std::size_t output_dim) const;
  void validate() const;

  /// key is "section.name"; throws InvalidArgument on unknown keys.
  void set(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> entries() const;
};

ExperimentConfig load_config(const std::string& path);
/// Starts from the defaults of the file's system and applies every key.
ExperimentConfig parse_config(const std::string& text);
void save_config(const ExperimentConfig& cfg, const std::string& path);
std::string format_config(const ExperimentConfig& cfg);

}  // namespace lapis::pipeline
