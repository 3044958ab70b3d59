#pragma once

#include <span>
#include <string>

#include "failopt/eval/attack.hpp"

namespace failopt::eval {

/// One row per report: detector, attack, task, auroc, base_auroc, asr, tau, n_samples.
std::string grid_csv(std::span<const EvalReport> reports);

/// The same rows as an aligned plain-text table; AUROC and ASR in percent.
std::string grid_text(std::span<const EvalReport> reports);

/// Fixed six-decimal rendering used in every CSV this library writes.
std::string format_number(double v);

/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_field(const std::string& s);

}  // namespace failopt::eval
