#include "nnquad/relu_net.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nnquad/errors.hpp"

namespace nnquad {

int FeatureDim(FeatureKind kind) {
  return kind == FeatureKind::kTranslational ? 13 : 15;
}

const char* FeatureKindName(FeatureKind kind) {
  return kind == FeatureKind::kTranslational ? "translational" : "rotational";
}

FeatureKind ParseFeatureKind(const std::string& name) {
  if (name == "translational") return FeatureKind::kTranslational;
  if (name == "rotational") return FeatureKind::kRotational;
  throw Error(ErrorCode::kInvalidArgument, "unknown feature kind '" + name + "'");
}

std::vector<std::string> FeatureNames(FeatureKind kind) {
  std::vector<std::string> names = {"vx",       "vy",         "vz",       "wx",
                                    "wy",       "wz",         "sin_phi",  "sin_theta",
                                    "sin_psi",  "cos_phi",    "cos_theta", "cos_psi"};
  if (kind == FeatureKind::kTranslational) {
    names.push_back("u1");
  } else {
    names.insert(names.end(), {"u2", "u3", "u4"});
  }
  return names;
}

Eigen::VectorXd Featurize(const State& s, const RotorInput& u, FeatureKind kind) {
  Eigen::VectorXd beta(FeatureDim(kind));
  beta.segment<3>(0) = s.v;
  beta.segment<3>(3) = s.omega;
  beta.segment<3>(6) = s.zeta.array().sin();
  beta.segment<3>(9) = s.zeta.array().cos();
  if (kind == FeatureKind::kTranslational) {
    beta(12) = u.u1;
  } else {
    beta.segment<3>(12) = u.torque;
  }
  return beta;
}

FeatureJacobian FeaturizeJacobian(const State& s, FeatureKind kind) {
  const int dim = FeatureDim(kind);
  FeatureJacobian jac{Eigen::MatrixXd::Zero(dim, kStateDim),
                      Eigen::MatrixXd::Zero(dim, kInputDim)};
  jac.d_state.block<3, 3>(0, kVel).setIdentity();
  jac.d_state.block<3, 3>(3, kRate).setIdentity();
  for (int i = 0; i < 3; ++i) {
    jac.d_state(6 + i, kAtt + i) = std::cos(s.zeta(i));
    jac.d_state(9 + i, kAtt + i) = -std::sin(s.zeta(i));
  }
  if (kind == FeatureKind::kTranslational) {
    jac.d_input(12, 0) = 1.0;
  } else {
    jac.d_input.block<3, 3>(12, 1).setIdentity();
  }
  return jac;
}

ReluNet ReluNet::Zeros(FeatureKind kind, int hidden_units) {
  const int dim = FeatureDim(kind);
  ReluNet net;
  net.kind = kind;
  net.W = Eigen::MatrixXd::Zero(dim, hidden_units);
  net.hidden_bias = Eigen::VectorXd::Zero(hidden_units);
  net.w = Eigen::MatrixXd::Zero(hidden_units, 3);
  net.in_mean = Eigen::VectorXd::Zero(dim);
  net.in_std = Eigen::VectorXd::Ones(dim);
  return net;
}

void ReluNet::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kModelContractViolation, what);
  };
  const int dim = FeatureDim(kind);
  const auto n = W.cols();
  if (W.rows() != dim) fail("W has " + std::to_string(W.rows()) + " rows, expected " + std::to_string(dim));
  if (n < 1) fail("hidden layer is empty");
  if (hidden_bias.size() != n) fail("hidden_bias length does not match W");
  if (w.rows() != n || w.cols() != 3) fail("w must be N x 3");
  if (in_mean.size() != dim || in_std.size() != dim) fail("input scaler length mismatch");
  if (!W.allFinite() || !hidden_bias.allFinite() || !w.allFinite() || !b.allFinite() ||
      !in_mean.allFinite() || !in_std.allFinite() || !out_mean.allFinite() ||
      !out_std.allFinite()) {
    fail("non-finite parameter");
  }
  if (!(in_std.minCoeff() > 0.0)) fail("in_std must be positive");
  if (!(out_std.minCoeff() > 0.0)) fail("out_std must be positive");
}

namespace {

void CheckInput(const ReluNet& net, const Eigen::VectorXd& beta) {
  if (beta.size() != net.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input has length " + std::to_string(beta.size()) + ", net expects " +
                    std::to_string(net.input_dim()));
  }
}

Eigen::VectorXd PreActivation(const ReluNet& net, const Eigen::VectorXd& beta) {
  Eigen::VectorXd x = (beta - net.in_mean).cwiseQuotient(net.in_std);
  return net.W.transpose() * x + net.hidden_bias;
}

}  // namespace

NetOutput Forward(const ReluNet& net, const Eigen::VectorXd& beta) {
  CheckInput(net, beta);
  Eigen::VectorXd hidden = PreActivation(net, beta).cwiseMax(0.0);
  NetOutput out;
  out.normalized = net.w.transpose() * hidden + net.b;
  out.physical = net.out_mean + net.out_std.cwiseProduct(out.normalized);
  return out;
}

Eigen::MatrixXd Jacobian(const ReluNet& net, const Eigen::VectorXd& beta) {
  CheckInput(net, beta);
  Eigen::VectorXd pre = PreActivation(net, beta);
  // rows of w^T masked by the active set, then chained through W^T and the
  // input scaler.
  Eigen::MatrixXd masked = net.w.transpose();
  for (Eigen::Index j = 0; j < pre.size(); ++j) {
    if (!(pre(j) > 0.0)) masked.col(j).setZero();
  }
  Eigen::MatrixXd jac = net.out_std.asDiagonal() * (masked * net.W.transpose());
  return jac * net.in_std.cwiseInverse().asDiagonal();
}

// Model file layout (text, one token stream):
//   nnquad-relu-model
//   version 1
//   kind <translational|rotational>
//   hidden_units <N>
//   input_dim <D>
//   W <D> <N>           followed by D rows of N values
//   hidden_bias <N>     followed by N values
//   w <N> 3             followed by N rows of 3 values
//   b 3 / in_mean <D> / in_std <D> / out_mean 3 / out_std 3
//   end
// Numbers are printed with 17 significant digits so every double round-trips.
std::string SerializeModel(const ReluNet& net) {
  net.Validate();
  std::ostringstream os;
  char buf[32];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    os << buf;
  };
  auto matrix = [&](const char* name, const Eigen::MatrixXd& m) {
    os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) os << ' ';
        put(m(r, c));
      }
      os << '\n';
    }
  };
  auto vector = [&](const char* name, const Eigen::VectorXd& v) {
    os << name << ' ' << v.size() << '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) os << ' ';
      put(v(i));
    }
    os << '\n';
  };
  os << "nnquad-relu-model\nversion 1\n";
  os << "kind " << FeatureKindName(net.kind) << '\n';
  os << "hidden_units " << net.hidden_units() << '\n';
  os << "input_dim " << net.input_dim() << '\n';
  matrix("W", net.W);
  vector("hidden_bias", net.hidden_bias);
  matrix("w", net.w);
  vector("b", net.b);
  vector("in_mean", net.in_mean);
  vector("in_std", net.in_std);
  vector("out_mean", net.out_mean);
  vector("out_std", net.out_std);
  os << "end\n";
  return os.str();
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(const std::string& text) : in_(text) {}

  [[noreturn]] void Fail(const std::string& field, const std::string& what) const {
    throw Error(ErrorCode::kMalformedModelFile, "field '" + field + "': " + what);
  }

  std::string Word(const std::string& field) {
    std::string tok;
    if (!(in_ >> tok)) Fail(field, "unexpected end of file");
    return tok;
  }

  void Expect(const std::string& field) {
    std::string tok = Word(field);
    if (tok != field) Fail(field, "expected '" + field + "', found '" + tok + "'");
  }

  long Integer(const std::string& field) {
    std::string tok = Word(field);
    long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) Fail(field, "bad integer '" + tok + "'");
    return value;
  }

  double Real(const std::string& field) {
    std::string tok = Word(field);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) Fail(field, "bad number '" + tok + "'");
    return value;
  }

  Eigen::MatrixXd Matrix(const std::string& field, long rows, long cols) {
    Expect(field);
    if (Integer(field) != rows || Integer(field) != cols) Fail(field, "dimension mismatch");
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) m(r, c) = Real(field);
    return m;
  }

  Eigen::VectorXd Vector(const std::string& field, long n) {
    Expect(field);
    if (Integer(field) != n) Fail(field, "length mismatch");
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v(i) = Real(field);
    return v;
  }

 private:
  std::istringstream in_;
};

}  // namespace

ReluNet ParseModel(const std::string& text) {
  TokenReader rd(text);
  rd.Expect("nnquad-relu-model");
  rd.Expect("version");
  if (long version = rd.Integer("version"); version != 1) {
    rd.Fail("version", "unsupported version " + std::to_string(version));
  }
  rd.Expect("kind");
  ReluNet net;
  std::string kind = rd.Word("kind");
  if (kind == "translational") {
    net.kind = FeatureKind::kTranslational;
  } else if (kind == "rotational") {
    net.kind = FeatureKind::kRotational;
  } else {
    rd.Fail("kind", "unknown kind '" + kind + "'");
  }
  rd.Expect("hidden_units");
  const long n = rd.Integer("hidden_units");
  if (n < 1) rd.Fail("hidden_units", "must be positive");
  rd.Expect("input_dim");
  const long dim = rd.Integer("input_dim");
  if (dim != FeatureDim(net.kind)) rd.Fail("input_dim", "does not match kind");
  net.W = rd.Matrix("W", dim, n);
  net.hidden_bias = rd.Vector("hidden_bias", n);
  net.w = rd.Matrix("w", n, 3);
  net.b = rd.Vector("b", 3);
  net.in_mean = rd.Vector("in_mean", dim);
  net.in_std = rd.Vector("in_std", dim);
  net.out_mean = rd.Vector("out_mean", 3);
  net.out_std = rd.Vector("out_std", 3);
  rd.Expect("end");
  if (!(net.in_std.minCoeff() > 0.0)) rd.Fail("in_std", "entries must be positive");
  if (!(net.out_std.minCoeff() > 0.0)) rd.Fail("out_std", "entries must be positive");
  try {
    net.Validate();
  } catch (const Error& e) {
    rd.Fail("parameters", e.what());
  }
  return net;
}

void SaveModel(const ReluNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << SerializeModel(net);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

ReluNet LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseModel(buf.str());
}

}  // namespace nnquad
