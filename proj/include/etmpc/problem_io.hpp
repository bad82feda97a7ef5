#pragma once

// Problem-definition files. Plain text, '#' starts a comment, tokens are
// whitespace separated and may span lines:
//
//   name    four_mass_oscillator
//   horizon 10
//   ts      0.5            # optional: A, B are continuous-time, ZOH-discretized
//   A 8 8   <64 numbers, row-major>
//   B 8 3   <24 numbers>
//   Q identity 8           # also: Q diag 8 <values>,  Q zeros 8 8
//   R identity 3
//   P dare                 # optional; default. Or: P 8 8 <values>
//   x_lo 8 fill -4         # or: x_lo 8 <values>
//   x_hi 8 fill 4
//   u_lo 3 fill -0.5
//   u_hi 3 fill 0.5
//   t_lo / t_hi            # optional terminal box, same syntax; default state box

#include <filesystem>
#include <istream>
#include <string>

#include "etmpc/problem.hpp"

namespace etmpc {

/// Throws Error(parse_error) with the offending token in the message.
MpcProblem parse_problem(std::istream& in, const std::string& source_name = "<stream>");

MpcProblem load_problem(const std::filesystem::path& path);

/// Directory searched for bundled problems: $ETMPC_PROBLEM_DIR if set,
/// otherwise the directory compiled into the library.
std::filesystem::path problem_directory();

/// `name_or_path` is used as-is if it names an existing file; otherwise
/// <problem_directory()>/<name>.mpc. Throws Error(invalid_argument) if missing.
std::filesystem::path resolve_problem_path(const std::string& name_or_path);

}  // namespace etmpc
