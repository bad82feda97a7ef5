#include "etmpc/problem_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "etmpc/error.hpp"

namespace etmpc {

namespace {

class TokenStream {
 public:
  TokenStream(std::istream& in, std::string source) : source_(std::move(source)) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back({tok, line_no});
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }

  std::string next(const char* what) {
    if (done()) fail(std::string("unexpected end of file, expected ") + what);
    return tokens_[pos_++].text;
  }

  std::string peek() const { return done() ? std::string() : tokens_[pos_].text; }

  double number(const char* what) {
    const std::string tok = next(what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("expected " + std::string(what) + ", got '" + tok + "'", true);
    return v;
  }

  Eigen::Index count(const char* what) {
    const double v = number(what);
    if (v < 0 || v != static_cast<double>(static_cast<Eigen::Index>(v))) fail(std::string("bad ") + what, true);
    return static_cast<Eigen::Index>(v);
  }

  [[noreturn]] void fail(const std::string& msg, bool at_previous = false) const {
    std::ostringstream os;
    os << source_;
    const std::size_t at = at_previous && pos_ > 0 ? pos_ - 1 : pos_;
    if (at < tokens_.size()) os << ":" << tokens_[at].line;
    os << ": " << msg;
    throw Error(Errc::parse_error, os.str());
  }

 private:
  struct Token {
    std::string text;
    int line;
  };
  std::string source_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

Matrix read_matrix(TokenStream& ts) {
  const std::string head = ts.peek();
  if (head == "identity") {
    ts.next("identity");
    const auto k = ts.count("size");
    return Matrix::Identity(k, k);
  }
  if (head == "diag") {
    ts.next("diag");
    const auto k = ts.count("size");
    Vector d(k);
    for (Eigen::Index i = 0; i < k; ++i) d(i) = ts.number("diagonal entry");
    return d.asDiagonal();
  }
  if (head == "zeros") {
    ts.next("zeros");
    const auto r = ts.count("rows");
    const auto c = ts.count("cols");
    return Matrix::Zero(r, c);
  }
  const auto rows = ts.count("rows");
  const auto cols = ts.count("cols");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = ts.number("matrix entry");
  return out;
}

Vector read_vector(TokenStream& ts) {
  const auto len = ts.count("length");
  if (ts.peek() == "fill") {
    ts.next("fill");
    return Vector::Constant(len, ts.number("fill value"));
  }
  Vector out(len);
  for (Eigen::Index i = 0; i < len; ++i) out(i) = ts.number("vector entry");
  return out;
}

}  // namespace

MpcProblem parse_problem(std::istream& in, const std::string& source_name) {
  TokenStream ts(in, source_name);
  MpcProblem p;
  std::optional<double> sample_time;
  bool have_a = false, have_b = false, have_horizon = false;
  while (!ts.done()) {
    const std::string key = ts.next("key");
    if (key == "name") {
      p.name = ts.next("name");
    } else if (key == "horizon") {
      p.horizon = static_cast<int>(ts.count("horizon"));
      have_horizon = true;
    } else if (key == "ts") {
      sample_time = ts.number("sampling time");
    } else if (key == "A") {
      p.A = read_matrix(ts);
      have_a = true;
    } else if (key == "B") {
      p.B = read_matrix(ts);
      have_b = true;
    } else if (key == "Q") {
      p.Q = read_matrix(ts);
    } else if (key == "R") {
      p.R = read_matrix(ts);
    } else if (key == "P") {
      if (ts.peek() == "dare") {
        ts.next("dare");
        p.P.reset();
      } else {
        p.P = read_matrix(ts);
      }
    } else if (key == "x_lo") {
      p.x_lo = read_vector(ts);
    } else if (key == "x_hi") {
      p.x_hi = read_vector(ts);
    } else if (key == "u_lo") {
      p.u_lo = read_vector(ts);
    } else if (key == "u_hi") {
      p.u_hi = read_vector(ts);
    } else if (key == "t_lo") {
      p.t_lo = read_vector(ts);
    } else if (key == "t_hi") {
      p.t_hi = read_vector(ts);
    } else {
      ts.fail("unknown key '" + key + "'", true);
    }
  }
  if (!have_a || !have_b || !have_horizon) ts.fail("A, B and horizon are required");
  if (p.Q.size() == 0) ts.fail("Q is required");
  if (p.R.size() == 0) ts.fail("R is required");
  if (sample_time) {
    if (p.A.rows() != p.A.cols() || p.B.rows() != p.A.rows()) ts.fail("A/B shapes inconsistent for ZOH");
    auto [ad, bd] = discretize_zoh(p.A, p.B, *sample_time);
    p.A = std::move(ad);
    p.B = std::move(bd);
  }
  if (p.name.empty()) p.name = source_name;
  return p;
}

MpcProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_argument, "cannot open problem file " + path.string());
  return parse_problem(in, path.string());
}

std::filesystem::path problem_directory() {
  if (const char* env = std::getenv("ETMPC_PROBLEM_DIR"); env && *env) return env;
  return ETMPC_DEFAULT_PROBLEM_DIR;
}

std::filesystem::path resolve_problem_path(const std::string& name_or_path) {
  std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  std::filesystem::path bundled = problem_directory() / (name_or_path + ".mpc");
  if (std::filesystem::is_regular_file(bundled)) return bundled;
  throw Error(Errc::invalid_argument,
              "problem '" + name_or_path + "' not found (looked in " + problem_directory().string() + ")");
}

}  // namespace etmpc
