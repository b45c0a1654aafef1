#include <bit>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spatial/matmul.hpp"

namespace spatial {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

double parse_real(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad matrix entry: " + s);
  return v;
}

void put_u64(std::ostream& out, std::uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((x >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated matrix file");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= std::uint64_t(b[i]) << (8 * i);
  return x;
}

}  // namespace

MatrixData read_matrix_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    rows.push_back(std::move(fields));
  }
  const auto n = Eigen::Index(rows.size());
  for (const auto& r : rows)
    if (Eigen::Index(r.size()) != n) throw std::invalid_argument("matrix must be square");

  MatrixData m;
  m.ints.resize(n, n);
  bool integral = true;
  for (Eigen::Index i = 0; i < n && integral; ++i)
    for (Eigen::Index j = 0; j < n && integral; ++j)
      integral = parse_int(rows[std::size_t(i)][std::size_t(j)], m.ints(i, j));
  if (integral) return m;

  m.type = ElementType::Float64;
  m.ints.resize(0, 0);
  m.reals.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m.reals(i, j) = parse_real(rows[std::size_t(i)][std::size_t(j)]);
  return m;
}

void write_matrix_csv(std::ostream& out, const MatrixData& m) {
  const bool real = m.type == ElementType::Float64;
  const Eigen::Index n = real ? m.reals.rows() : m.ints.rows();
  out.precision(17);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j) out << ',';
      if (real)
        out << m.reals(i, j);
      else
        out << m.ints(i, j);
    }
    out << '\n';
  }
}

MatrixData read_matrix_binary(std::istream& in) {
  const auto n = Eigen::Index(get_u64(in));
  char type = 0;
  if (!in.get(type)) throw std::runtime_error("truncated matrix file");
  MatrixData m;
  if (type == char(ElementType::Int64)) {
    m.ints.resize(n, n);
    for (Eigen::Index i = 0; i < n * n; ++i) m.ints.data()[i] = std::bit_cast<std::int64_t>(get_u64(in));
  } else if (type == char(ElementType::Float64)) {
    m.type = ElementType::Float64;
    m.reals.resize(n, n);
    for (Eigen::Index i = 0; i < n * n; ++i) m.reals.data()[i] = std::bit_cast<double>(get_u64(in));
  } else {
    throw std::runtime_error("unknown matrix element type");
  }
  return m;
}

void write_matrix_binary(std::ostream& out, const MatrixData& m) {
  const bool real = m.type == ElementType::Float64;
  const Eigen::Index n = real ? m.reals.rows() : m.ints.rows();
  put_u64(out, std::uint64_t(n));
  out.put(char(m.type));
  for (Eigen::Index i = 0; i < n * n; ++i)
    put_u64(out, real ? std::bit_cast<std::uint64_t>(m.reals.data()[i]) : std::bit_cast<std::uint64_t>(m.ints.data()[i]));
}

}  // namespace spatial
