#include "ttde/tt_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ttde {

namespace {

constexpr Index kDenseLimit = 10'000'000;

struct ThinQR {
  Matrix q;  // rows x k, orthonormal columns
  Matrix r;  // k x cols, upper triangular
};

// Thin QR with k = min(rows, cols); the diagonal of R is made nonnegative so
// the factorization is unique for full-rank input.
ThinQR thin_qr(const Matrix& a) {
  const Index k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Matrix> qr(a);
  ThinQR out;
  out.q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index i = 0; i < k; ++i) {
    if (out.r(i, i) < 0.0) {
      out.r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  return out;
}

void check_same_modes(const TTTensor& a, const TTTensor& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
  for (int k = 0; k < a.dims(); ++k) {
    if (a.mode_size(k) != b.mode_size(k)) {
      throw std::invalid_argument(std::string(what) + ": mode size mismatch");
    }
  }
}

bool ranks_feasible(const TTTensor& t) {
  for (int k = 0; k < t.dims(); ++k) {
    const TTCore& c = t.core(k);
    if (c.right_rank() > c.left_rank() * c.mode_size()) return false;
    if (c.left_rank() > c.mode_size() * c.right_rank()) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------- TTCore

TTCore::TTCore(Index left_rank, Index mode_size, Index right_rank)
    : left_(left_rank),
      mode_(mode_size),
      right_(right_rank),
      data_(static_cast<std::size_t>(left_rank * mode_size * right_rank),
            0.0) {
  if (left_rank < 1 || mode_size < 1 || right_rank < 1) {
    throw std::invalid_argument("TTCore: all dimensions must be positive");
  }
}

TTCore::SliceMap TTCore::slice(Index i) {
  return SliceMap(data_.data() + i * right_, left_, right_,
                  Eigen::OuterStride<>(mode_ * right_));
}

TTCore::ConstSliceMap TTCore::slice(Index i) const {
  return ConstSliceMap(data_.data() + i * right_, left_, right_,
                       Eigen::OuterStride<>(mode_ * right_));
}

TTCore::UnfoldingMap TTCore::left_unfolding() {
  return UnfoldingMap(data_.data(), left_ * mode_, right_);
}

TTCore::ConstUnfoldingMap TTCore::left_unfolding() const {
  return ConstUnfoldingMap(data_.data(), left_ * mode_, right_);
}

TTCore::UnfoldingMap TTCore::right_unfolding() {
  return UnfoldingMap(data_.data(), left_, mode_ * right_);
}

TTCore::ConstUnfoldingMap TTCore::right_unfolding() const {
  return ConstUnfoldingMap(data_.data(), left_, mode_ * right_);
}

TTCore TTCore::from_left_unfolding(const Eigen::Ref<const Matrix>& m,
                                   Index mode_size) {
  if (m.rows() % mode_size != 0) {
    throw std::invalid_argument("TTCore::from_left_unfolding: bad shape");
  }
  TTCore core(m.rows() / mode_size, mode_size, m.cols());
  core.left_unfolding() = m;
  return core;
}

TTCore TTCore::from_right_unfolding(const Eigen::Ref<const Matrix>& m,
                                    Index mode_size) {
  if (m.cols() % mode_size != 0) {
    throw std::invalid_argument("TTCore::from_right_unfolding: bad shape");
  }
  TTCore core(m.rows(), mode_size, m.cols() / mode_size);
  core.right_unfolding() = m;
  return core;
}

TTCore multiply_left(const Eigen::Ref<const Matrix>& left, const TTCore& core) {
  TTCore out(left.rows(), core.mode_size(), core.right_rank());
  out.right_unfolding().noalias() = left * core.right_unfolding();
  return out;
}

TTCore multiply_right(const TTCore& core,
                      const Eigen::Ref<const Matrix>& right) {
  TTCore out(core.left_rank(), core.mode_size(), right.cols());
  out.left_unfolding().noalias() = core.left_unfolding() * right;
  return out;
}

// -------------------------------------------------------------- TTTensor

TTTensor::TTTensor(std::vector<TTCore> cores) : cores_(std::move(cores)) {
  if (cores_.empty()) throw std::invalid_argument("TTTensor: no cores");
  if (cores_.front().left_rank() != 1 || cores_.back().right_rank() != 1) {
    throw std::invalid_argument("TTTensor: boundary ranks must be 1");
  }
  for (std::size_t k = 1; k < cores_.size(); ++k) {
    if (cores_[k - 1].right_rank() != cores_[k].left_rank()) {
      throw std::invalid_argument("TTTensor: rank mismatch between cores " +
                                  std::to_string(k - 1) + " and " +
                                  std::to_string(k));
    }
  }
}

TTTensor TTTensor::zeros(std::span<const Index> mode_sizes,
                         std::span<const Index> internal_ranks) {
  if (mode_sizes.empty() || internal_ranks.size() + 1 != mode_sizes.size()) {
    throw std::invalid_argument("TTTensor::zeros: expected d-1 ranks");
  }
  std::vector<TTCore> cores;
  const std::size_t d = mode_sizes.size();
  for (std::size_t k = 0; k < d; ++k) {
    const Index left = k == 0 ? 1 : internal_ranks[k - 1];
    const Index right = k + 1 == d ? 1 : internal_ranks[k];
    cores.emplace_back(left, mode_sizes[k], right);
  }
  return TTTensor(std::move(cores));
}

std::vector<Index> TTTensor::mode_sizes() const {
  std::vector<Index> out;
  for (const auto& c : cores_) out.push_back(c.mode_size());
  return out;
}

std::vector<Index> TTTensor::ranks() const {
  std::vector<Index> out{1};
  for (const auto& c : cores_) out.push_back(c.right_rank());
  return out;
}

Index TTTensor::max_rank() const {
  Index r = 1;
  for (const auto& c : cores_) r = std::max(r, c.right_rank());
  return r;
}

Index TTTensor::num_parameters() const {
  Index n = 0;
  for (const auto& c : cores_) n += c.size();
  return n;
}

double TTTensor::entry(std::span<const Index> index) const {
  if (static_cast<int>(index.size()) != dims()) {
    throw std::invalid_argument("TTTensor::entry: index length mismatch");
  }
  RowVector env = RowVector::Ones(1);
  for (int k = 0; k < dims(); ++k) {
    env = env * core(k).slice(index[static_cast<std::size_t>(k)]);
  }
  return env(0);
}

TTTensor TTTensor::scaled(double factor) const {
  TTTensor out = *this;
  for (double& v : out.cores_.front().data()) v *= factor;
  return out;
}

Vector TTTensor::to_dense() const {
  Index total = 1;
  for (const auto& c : cores_) {
    total *= c.mode_size();
    if (total > kDenseLimit) {
      throw std::invalid_argument("TTTensor::to_dense: tensor too large");
    }
  }
  Matrix cur = Matrix::Ones(1, 1);
  for (const auto& c : cores_) {
    Matrix next(cur.rows() * c.mode_size(), c.right_rank());
    for (Index p = 0; p < cur.rows(); ++p) {
      for (Index i = 0; i < c.mode_size(); ++i) {
        next.row(p * c.mode_size() + i).noalias() = cur.row(p) * c.slice(i);
      }
    }
    cur = std::move(next);
  }
  return cur.col(0);
}

TTTensor operator+(const TTTensor& a, const TTTensor& b) {
  check_same_modes(a, b, "TTTensor +");
  const int d = a.dims();
  if (d == 1) {
    TTCore c(1, a.mode_size(0), 1);
    for (Index i = 0; i < a.mode_size(0); ++i) {
      c(0, i, 0) = a.core(0)(0, i, 0) + b.core(0)(0, i, 0);
    }
    return TTTensor({c});
  }
  std::vector<TTCore> cores;
  for (int k = 0; k < d; ++k) {
    const TTCore& ca = a.core(k);
    const TTCore& cb = b.core(k);
    const bool first = k == 0;
    const bool last = k == d - 1;
    const Index left = first ? 1 : ca.left_rank() + cb.left_rank();
    const Index right = last ? 1 : ca.right_rank() + cb.right_rank();
    TTCore c(left, ca.mode_size(), right);
    const Index a_left_off = 0;
    const Index b_left_off = first ? 0 : ca.left_rank();
    const Index a_right_off = 0;
    const Index b_right_off = last ? 0 : ca.right_rank();
    for (Index i = 0; i < ca.mode_size(); ++i) {
      c.slice(i).block(a_left_off, a_right_off, ca.left_rank(),
                       ca.right_rank()) += ca.slice(i);
      c.slice(i).block(b_left_off, b_right_off, cb.left_rank(),
                       cb.right_rank()) += cb.slice(i);
    }
    cores.push_back(std::move(c));
  }
  return TTTensor(std::move(cores));
}

double inner_product(const TTTensor& a, const TTTensor& b) {
  check_same_modes(a, b, "inner_product");
  Matrix env = Matrix::Ones(1, 1);
  for (int k = 0; k < a.dims(); ++k) {
    const TTCore& ca = a.core(k);
    const TTCore& cb = b.core(k);
    Matrix next = Matrix::Zero(ca.right_rank(), cb.right_rank());
    for (Index n = 0; n < ca.mode_size(); ++n) {
      next.noalias() += ca.slice(n).transpose() * (env * cb.slice(n));
    }
    env = std::move(next);
  }
  return env(0, 0);
}

double frobenius_norm(const TTTensor& t) {
  return std::sqrt(std::max(0.0, inner_product(t, t)));
}

double contract_rank1(const TTTensor& t, std::span<const Vector> vectors) {
  if (static_cast<int>(vectors.size()) != t.dims()) {
    throw std::invalid_argument("contract_rank1: need one vector per dim");
  }
  RowVector env = RowVector::Ones(1);
  for (int k = 0; k < t.dims(); ++k) {
    const TTCore& c = t.core(k);
    const Vector& v = vectors[static_cast<std::size_t>(k)];
    if (v.size() != c.mode_size()) {
      throw std::invalid_argument("contract_rank1: vector length mismatch");
    }
    Matrix m = Matrix::Zero(c.left_rank(), c.right_rank());
    for (Index n = 0; n < c.mode_size(); ++n) {
      if (v[n] != 0.0) m += v[n] * c.slice(n);
    }
    env = env * m;
  }
  return env(0);
}

TTTensor rank1_from_vectors(std::span<const Vector> vectors) {
  if (vectors.empty()) {
    throw std::invalid_argument("rank1_from_vectors: no vectors");
  }
  std::vector<TTCore> cores;
  for (const Vector& v : vectors) {
    TTCore c(1, v.size(), 1);
    for (Index i = 0; i < v.size(); ++i) c(0, i, 0) = v[i];
    cores.push_back(std::move(c));
  }
  return TTTensor(std::move(cores));
}

TTTensor apply_gram_operator(const TTTensor& t, std::span<const Matrix> grams) {
  if (static_cast<int>(grams.size()) != t.dims()) {
    throw std::invalid_argument("apply_gram_operator: need one matrix per dim");
  }
  std::vector<TTCore> cores;
  for (int k = 0; k < t.dims(); ++k) {
    const TTCore& c = t.core(k);
    const Matrix& g = grams[static_cast<std::size_t>(k)];
    if (g.rows() != c.mode_size() || g.cols() != c.mode_size()) {
      throw std::invalid_argument("apply_gram_operator: matrix shape mismatch");
    }
    TTCore out(c.left_rank(), c.mode_size(), c.right_rank());
    for (Index a = 0; a < c.left_rank(); ++a) {
      Eigen::Map<const RowMatrix> block(c.data().data() + a * c.mode_size() *
                                                              c.right_rank(),
                                        c.mode_size(), c.right_rank());
      Eigen::Map<RowMatrix> dest(out.data().data() + a * c.mode_size() *
                                                         c.right_rank(),
                                 c.mode_size(), c.right_rank());
      dest.noalias() = g * block;
    }
    cores.push_back(std::move(out));
  }
  return TTTensor(std::move(cores));
}

// -------------------------------------------------------- orthogonalization

TTTensor reduce_to_feasible_ranks(const TTTensor& t) {
  if (ranks_feasible(t)) return t;
  std::vector<TTCore> cores = t.cores();
  const std::size_t d = cores.size();
  // Left-to-right QR shrinks ranks exceeding r_{k-1} m_k.
  for (std::size_t k = 0; k + 1 < d; ++k) {
    ThinQR qr = thin_qr(cores[k].left_unfolding());
    cores[k] = TTCore::from_left_unfolding(qr.q, cores[k].mode_size());
    cores[k + 1] = multiply_left(qr.r, cores[k + 1]);
  }
  // Right-to-left LQ shrinks ranks exceeding m_k r_k.
  for (std::size_t k = d - 1; k > 0; --k) {
    ThinQR qr = thin_qr(cores[k].right_unfolding().transpose());
    cores[k] = TTCore::from_right_unfolding(qr.q.transpose(),
                                            cores[k].mode_size());
    cores[k - 1] = multiply_right(cores[k - 1], qr.r.transpose());
  }
  return TTTensor(std::move(cores));
}

std::vector<Index> Orthogonalization::ranks() const {
  std::vector<Index> out{1};
  for (const auto& c : center) out.push_back(c.right_rank());
  return out;
}

TTTensor Orthogonalization::with_center(int k) const {
  std::vector<TTCore> cores;
  for (int j = 0; j < dims(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    cores.push_back(j < k ? left[idx] : (j == k ? center[idx] : right[idx]));
  }
  return TTTensor(std::move(cores));
}

Orthogonalization left_right_orthogonalize(const TTTensor& input) {
  const TTTensor t = reduce_to_feasible_ranks(input);
  const int d = t.dims();
  const auto ud = static_cast<std::size_t>(d);
  Orthogonalization out;
  out.left.resize(ud);
  out.right.resize(ud);
  out.center.resize(ud);

  // left_factor[k] * G_k ... reproduces U_k-part; right_factor[k] likewise.
  std::vector<Matrix> left_factor(ud);
  std::vector<Matrix> right_factor(ud);

  left_factor[0] = Matrix::Ones(1, 1);
  for (int k = 0; k < d; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const TTCore carried = multiply_left(left_factor[uk], t.core(k));
    ThinQR qr = thin_qr(carried.left_unfolding());
    out.left[uk] = TTCore::from_left_unfolding(qr.q, carried.mode_size());
    if (k + 1 < d) left_factor[uk + 1] = std::move(qr.r);
  }

  right_factor[ud - 1] = Matrix::Ones(1, 1);
  for (int k = d - 1; k >= 0; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const TTCore carried = multiply_right(t.core(k), right_factor[uk]);
    ThinQR qr = thin_qr(carried.right_unfolding().transpose());
    out.right[uk] =
        TTCore::from_right_unfolding(qr.q.transpose(), carried.mode_size());
    if (k > 0) right_factor[uk - 1] = qr.r.transpose();
  }

  for (int k = 0; k < d; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    out.center[uk] = multiply_right(multiply_left(left_factor[uk], t.core(k)),
                                    right_factor[uk]);
  }
  return out;
}

TTTensor tt_round(const TTTensor& t, Index max_rank) {
  if (max_rank < 1) throw std::invalid_argument("tt_round: max_rank < 1");
  std::vector<TTCore> cores = t.cores();
  const std::size_t d = cores.size();
  for (std::size_t k = d - 1; k > 0; --k) {
    ThinQR qr = thin_qr(cores[k].right_unfolding().transpose());
    cores[k] = TTCore::from_right_unfolding(qr.q.transpose(),
                                            cores[k].mode_size());
    cores[k - 1] = multiply_right(cores[k - 1], qr.r.transpose());
  }
  for (std::size_t k = 0; k + 1 < d; ++k) {
    const Matrix a = cores[k].left_unfolding();
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index keep =
        std::min<Index>(max_rank, svd.singularValues().size());
    const Matrix u = svd.matrixU().leftCols(keep);
    const Matrix sv = svd.singularValues().head(keep).asDiagonal() *
                      svd.matrixV().leftCols(keep).transpose();
    cores[k] = TTCore::from_left_unfolding(u, cores[k].mode_size());
    cores[k + 1] = multiply_left(sv, cores[k + 1]);
  }
  return TTTensor(std::move(cores));
}

}  // namespace ttde
