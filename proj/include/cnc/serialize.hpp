#pragma once

#include <iosfwd>
#include <string>

#include "cnc/metrics.hpp"
#include "cnc/mlp.hpp"

namespace cnc {

// Binary model/gradient/report record IO used by checkpoints and the CLI.
// All integers little-endian u64, doubles raw IEEE-754.
void write_model(std::ostream& out, const MlpModel& model);
MlpModel read_model(std::istream& in);

void write_grad_store(std::ostream& out, const GradientStore& g);
GradientStore read_grad_store(std::istream& in);

void write_report(std::ostream& out, const MetricsReport& r);
MetricsReport read_report(std::istream& in);

void save_model_file(const MlpModel& model, const std::string& path);
MlpModel load_model_file(const std::string& path);

}  // namespace cnc
