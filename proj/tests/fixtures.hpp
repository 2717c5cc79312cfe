#pragma once

#include "calfront/experiment.hpp"
#include "calfront/synthgen.hpp"

namespace fixtures {

using namespace calfront;

inline experiment::BenchmarkConfig tiny_benchmark() {
  experiment::BenchmarkConfig b;
  b.height = 32;
  b.width = 32;
  b.source_glaciers = 1;
  b.target_glaciers = 3;
  b.val_glaciers = {0};
  b.test_glaciers = {1};
  b.eval_annotations_per_glacier = 3;
  b.melange_band_px = 4;
  b.wave_amplitude = 1.0;
  b.source_front_velocity = -0.05;
  return b;
}

inline const synthgen::DomainPair& tiny_pair() {
  static const auto pair = synthgen::generate_domain_pair(experiment::domain_pair_config(tiny_benchmark()));
  return pair;
}

inline experiment::RunConfig tiny_run_config() {
  auto c = experiment::default_run_config();
  c.benchmark = tiny_benchmark();
  c.net.height = 32;
  c.net.width = 32;
  c.net.widths = {4, 4, 6, 6, 8};
  c.net.gru_hidden = {3, 3, 4};
  c.train.steps_per_epoch = 3;
  c.train.max_epochs = 2;
  c.train.batch_size = 1;
  c.train.shift_augment_px = 2;
  return c;
}

}  // namespace fixtures
