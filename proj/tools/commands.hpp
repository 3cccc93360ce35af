#pragma once

#include <CLI11.hpp>

#include "util.hpp"

namespace eslcli {

void setup_synth(CLI::App& app);
void setup_train(CLI::App& app);
void setup_thresholds(CLI::App& app);
void setup_extract(CLI::App& app);
void setup_metrics(CLI::App& app);
void setup_diff(CLI::App& app);
void setup_selftrain(CLI::App& app);
void setup_sweep(CLI::App& app);
void setup_render(CLI::App& app);

}  // namespace eslcli
