#include "pwreg/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pwreg {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) {
    throw std::invalid_argument("expected a non-empty array of rows");
  }
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = static_cast<Eigen::Index>(rows.front().size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw std::invalid_argument("ragged matrix rows");
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      m(i, j) = row[static_cast<std::size_t>(j)].get<Scalar>();
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  if (!arr.is_array()) throw std::invalid_argument("expected an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = arr[static_cast<std::size_t>(i)].get<Scalar>();
  }
  return v;
}

json parse(const std::string& text, const char* format) {
  json doc = json::parse(text);
  if (!doc.is_object() || doc.value("format", "") != format) {
    throw std::invalid_argument(std::string("expected format \"") + format + "\"");
  }
  return doc;
}

}  // namespace

std::string net_to_json(const PotentialNet& net, const AdamState* adam) {
  json doc;
  doc["format"] = "pwreg-net/1";
  doc["h"] = net.h;
  doc["h_learnable"] = net.h_learnable;
  doc["W1"] = matrix_to_json(net.W1);
  doc["W2"] = matrix_to_json(net.W2);
  doc["W3"] = matrix_to_json(net.W3);
  doc["W4"] = matrix_to_json(net.W4);
  doc["W5"] = matrix_to_json(net.W5);
  doc["b1"] = vector_to_json(net.b1);
  doc["b2"] = vector_to_json(net.b2);
  doc["b3"] = vector_to_json(net.b3);
  doc["b4"] = vector_to_json(net.b4);
  doc["b5"] = net.b5;
  if (adam != nullptr && adam->m.size() > 0) {
    json state;
    state["step"] = adam->step;
    state["m"] = vector_to_json(adam->m);
    state["v"] = vector_to_json(adam->v);
    doc["adam"] = std::move(state);
  }
  return doc.dump(2) + "\n";
}

PotentialNet net_from_json(const std::string& text, AdamState* adam) {
  json doc = parse(text, "pwreg-net/1");
  PotentialNet net;
  net.h = doc.at("h").get<Scalar>();
  net.h_learnable = doc.at("h_learnable").get<bool>();
  net.W1 = matrix_from_json(doc.at("W1"));
  net.W2 = matrix_from_json(doc.at("W2"));
  net.W3 = matrix_from_json(doc.at("W3"));
  net.W4 = matrix_from_json(doc.at("W4"));
  net.W5 = matrix_from_json(doc.at("W5"));
  net.b1 = vector_from_json(doc.at("b1"));
  net.b2 = vector_from_json(doc.at("b2"));
  net.b3 = vector_from_json(doc.at("b3"));
  net.b4 = vector_from_json(doc.at("b4"));
  net.b5 = doc.at("b5").get<Scalar>();
  if (adam != nullptr) {
    *adam = AdamState{};
    if (doc.contains("adam")) {
      const json& state = doc.at("adam");
      adam->step = state.at("step").get<long>();
      adam->m = vector_from_json(state.at("m"));
      adam->v = vector_from_json(state.at("v"));
    }
  }
  return net;
}

std::string transform_to_json(const TransformParams& theta) {
  json doc;
  doc["format"] = "pwreg-theta/1";
  doc["A"] = matrix_to_json(theta.A);
  doc["t"] = vector_to_json(theta.t.transpose());
  doc["V"] = matrix_to_json(theta.V);
  return doc.dump(2) + "\n";
}

TransformParams transform_from_json(const std::string& text) {
  json doc = parse(text, "pwreg-theta/1");
  TransformParams theta;
  theta.A = matrix_from_json(doc.at("A"));
  theta.t = vector_from_json(doc.at("t")).transpose();
  theta.V = matrix_from_json(doc.at("V"));
  if (theta.A.rows() != theta.A.cols() || theta.t.cols() != theta.A.rows() ||
      theta.V.cols() != theta.A.rows()) {
    throw std::invalid_argument("inconsistent transform shapes");
  }
  return theta;
}

std::string nystrom_to_json(const NystromFactor& factor) {
  json doc;
  doc["format"] = "pwreg-nystrom/1";
  doc["rho"] = factor.rho;
  doc["lambda"] = vector_to_json(factor.lambda);
  doc["landmarks"] = factor.landmark_indices;
  doc["Q"] = matrix_to_json(factor.Q);
  return doc.dump(2) + "\n";
}

NystromFactor nystrom_from_json(const std::string& text) {
  json doc = parse(text, "pwreg-nystrom/1");
  NystromFactor factor;
  factor.rho = doc.at("rho").get<Scalar>();
  factor.lambda = vector_from_json(doc.at("lambda"));
  factor.landmark_indices = doc.at("landmarks").get<std::vector<int>>();
  factor.Q = matrix_from_json(doc.at("Q"));
  if (factor.Q.cols() != factor.lambda.size()) {
    throw std::invalid_argument("inconsistent factor shapes");
  }
  return factor;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  if (!out.good()) throw std::runtime_error(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace pwreg
