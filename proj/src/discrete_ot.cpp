#include "sfm/discrete_ot.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

#include "sfm/error.hpp"

namespace sfm {

std::size_t TransportPlan::nonzeros() const {
  return static_cast<std::size_t>(std::count_if(plan.values().begin(), plan.values().end(),
                                                [](double v) { return v > 0.0; }));
}

void check_marginal(std::span<const double> w, const char* which) {
  if (w.empty()) throw Error(std::string("marginal ") + which + " is empty");
  double s = 0.0;
  for (double v : w) {
    if (!std::isfinite(v)) throw Error(std::string("marginal ") + which + " has a non-finite weight");
    if (v < 0.0) throw Error(std::string("marginal ") + which + " has a negative weight");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) {
    throw Error(std::string("marginal ") + which + " sums to " + std::to_string(s) + ", expected 1");
  }
}

namespace {

void check_problem(std::span<const double> a, std::span<const double> b, const Matrix& cost) {
  check_marginal(a, "a");
  check_marginal(b, "b");
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw Error("cost matrix " + cost.shape_string() + " does not match marginals (" +
                std::to_string(a.size()) + "x" + std::to_string(b.size()) + ")");
  }
  if (!all_finite(cost.values())) throw Error("cost matrix has non-finite entries");
}

double plan_cost(const Matrix& plan, const Matrix& cost) {
  double c = 0.0;
  for (std::size_t k = 0; k < plan.size(); ++k) c += plan.values()[k] * cost.values()[k];
  return c;
}

// Uncapacitated transportation problem on a bipartite graph plus an artificial
// root. Sources 0..n-1, sinks n..n+m-1, root n+m.
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand, const Matrix& cost)
      : n_(supply.size()), m_(demand.size()), cost_(cost) {
    const std::size_t nodes = n_ + m_ + 1;
    root_ = n_ + m_;
    const std::size_t real = n_ * m_;
    arcs_ = real + n_ + m_;
    double cmax = 0.0;
    for (double c : cost.values()) cmax = std::max(cmax, std::abs(c));
    art_ = (cmax + 1.0) * static_cast<double>(n_ + m_);
    eps_ = 64.0 * DBL_EPSILON * art_;

    src_.resize(arcs_);
    dst_.resize(arcs_);
    c_.resize(arcs_);
    flow_.assign(arcs_, 0.0);
    in_tree_.assign(arcs_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        const std::size_t k = i * m_ + j;
        src_[k] = i;
        dst_[k] = n_ + j;
        c_[k] = cost(i, j);
      }
    }
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t k = real + i;
      src_[k] = i;
      dst_[k] = root_;
      c_[k] = art_;
      flow_[k] = supply[i];
      in_tree_[k] = 1;
    }
    for (std::size_t j = 0; j < m_; ++j) {
      const std::size_t k = real + n_ + j;
      src_[k] = root_;
      dst_[k] = n_ + j;
      c_[k] = art_;
      flow_[k] = demand[j];
      in_tree_[k] = 1;
    }
    parent_.assign(nodes, 0);
    pred_.assign(nodes, 0);
    up_.assign(nodes, 0);
    depth_.assign(nodes, 0);
    pi_.assign(nodes, 0.0);
    adj_.resize(nodes);
    block_ = std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(arcs_)))));
  }

  Matrix run() {
    rebuild_tree();
    const std::size_t max_pivots = 50 * arcs_ + 1000;
    for (std::size_t pivots = 0;; ++pivots) {
      if (pivots > max_pivots) throw Error("network simplex exceeded its pivot budget");
      const std::size_t e = find_entering();
      if (e == arcs_) break;
      pivot(e);
    }
    Matrix plan(n_, m_);
    for (std::size_t k = 0; k < n_ * m_; ++k) plan.values()[k] = in_tree_[k] ? flow_[k] : 0.0;
    return plan;
  }

 private:
  double reduced(std::size_t k) const { return c_[k] + pi_[src_[k]] - pi_[dst_[k]]; }

  std::size_t find_entering() {
    std::size_t scanned = 0;
    while (scanned < arcs_) {
      std::size_t best = arcs_;
      double best_rc = -eps_;
      const std::size_t stop = std::min(arcs_, scanned + block_);
      for (; scanned < stop; ++scanned) {
        const std::size_t k = (next_ + scanned) % arcs_;
        if (in_tree_[k]) continue;
        const double rc = reduced(k);
        if (rc < best_rc || (rc == best_rc && best != arcs_ && k < best)) {
          best_rc = rc;
          best = k;
        }
      }
      if (best != arcs_) {
        next_ = (next_ + scanned) % arcs_;
        return best;
      }
    }
    return arcs_;
  }

  void pivot(std::size_t e) {
    const std::size_t first = src_[e];
    const std::size_t second = dst_[e];
    std::size_t u = first, v = second;
    while (u != v) {
      if (depth_[u] >= depth_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    const std::size_t join = u;

    const double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    std::size_t leave = arcs_;
    bool leave_on_first = true;
    // Flow runs join -> first along the tree: decreasing where the arc points up.
    for (std::size_t w = first; w != join; w = parent_[w]) {
      if (up_[w] && flow_[pred_[w]] < delta) {
        delta = flow_[pred_[w]];
        leave = pred_[w];
        leave_on_first = true;
      }
    }
    // Flow runs second -> join: decreasing where the arc points down.
    for (std::size_t w = second; w != join; w = parent_[w]) {
      if (!up_[w] && flow_[pred_[w]] <= delta) {
        delta = flow_[pred_[w]];
        leave = pred_[w];
        leave_on_first = false;
      }
    }
    if (leave == arcs_) throw Error("transport problem is unbounded");

    if (delta > 0.0) {
      flow_[e] += delta;
      for (std::size_t w = first; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? -delta : delta;
      for (std::size_t w = second; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? delta : -delta;
      const double snap = 1e-15;
      for (std::size_t w = first; w != join; w = parent_[w]) {
        if (flow_[pred_[w]] < snap) flow_[pred_[w]] = 0.0;
      }
      for (std::size_t w = second; w != join; w = parent_[w]) {
        if (flow_[pred_[w]] < snap) flow_[pred_[w]] = 0.0;
      }
    }
    flow_[leave] = 0.0;
    in_tree_[leave] = 0;
    in_tree_[e] = 1;
    if (leave == e) return;
    unlink(leave, src_[leave]);
    unlink(leave, dst_[leave]);
    adj_[src_[e]].push_back(e);
    adj_[dst_[e]].push_back(e);
    // The subtree cut off by the leaving arc hangs from the entering arc now.
    const std::size_t in_node = leave_on_first ? first : second;
    const std::size_t anchor = leave_on_first ? second : first;
    attach(in_node, anchor, e);
  }

  void unlink(std::size_t k, std::size_t node) {
    auto& l = adj_[node];
    *std::find(l.begin(), l.end(), k) = l.back();
    l.pop_back();
  }

  void set_child(std::size_t y, std::size_t x, std::size_t k) {
    parent_[y] = x;
    pred_[y] = k;
    up_[y] = src_[k] == y;
    depth_[y] = depth_[x] + 1;
    // tree arcs have zero reduced cost: pi[dst] = pi[src] + c
    pi_[y] = up_[y] ? pi_[x] - c_[k] : pi_[x] + c_[k];
  }

  // Walks the subtree entered through arc k at node y, refreshing labels.
  void attach(std::size_t y, std::size_t x, std::size_t k) {
    set_child(y, x, k);
    stack_.clear();
    stack_.push_back(y);
    while (!stack_.empty()) {
      const std::size_t p = stack_.back();
      stack_.pop_back();
      for (std::size_t a : adj_[p]) {
        if (a == pred_[p]) continue;
        const std::size_t q = src_[a] == p ? dst_[a] : src_[a];
        set_child(q, p, a);
        stack_.push_back(q);
      }
    }
  }

  void rebuild_tree() {
    for (auto& l : adj_) l.clear();
    for (std::size_t k = 0; k < arcs_; ++k) {
      if (!in_tree_[k]) continue;
      adj_[src_[k]].push_back(k);
      adj_[dst_[k]].push_back(k);
    }
    stack_.clear();
    stack_.push_back(root_);
    parent_[root_] = root_;
    depth_[root_] = 0;
    pi_[root_] = 0.0;
    std::size_t visited = 0;
    while (!stack_.empty()) {
      const std::size_t x = stack_.back();
      stack_.pop_back();
      ++visited;
      for (std::size_t k : adj_[x]) {
        const std::size_t y = src_[k] == x ? dst_[k] : src_[k];
        if (x != root_ && k == pred_[x]) continue;
        set_child(y, x, k);
        stack_.push_back(y);
      }
    }
    if (visited != n_ + m_ + 1) throw Error("network simplex lost its spanning tree");
  }

  std::size_t n_, m_;
  const Matrix& cost_;
  std::size_t root_ = 0, arcs_ = 0, block_ = 0, next_ = 0;
  double art_ = 0.0, eps_ = 0.0;
  std::vector<std::size_t> src_, dst_;
  std::vector<double> c_, flow_;
  std::vector<char> in_tree_;
  std::vector<std::size_t> parent_, pred_, depth_;
  std::vector<char> up_;
  std::vector<double> pi_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> stack_;
};

}  // namespace

TransportPlan solve_emd(std::span<const double> a, std::span<const double> b, const Matrix& cost) {
  check_problem(a, b, cost);
  // strip zero-mass rows and columns, solve, reinsert
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) rows.push_back(i);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] > 0.0) cols.push_back(j);
  }
  std::vector<double> sa(rows.size()), sb(cols.size());
  Matrix sc(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sa[i] = a[rows[i]];
    for (std::size_t j = 0; j < cols.size(); ++j) sc(i, j) = cost(rows[i], cols[j]);
  }
  for (std::size_t j = 0; j < cols.size(); ++j) sb[j] = b[cols[j]];
  // equalize total masses so the artificial arcs drain completely
  const double ta = std::accumulate(sa.begin(), sa.end(), 0.0);
  const double tb = std::accumulate(sb.begin(), sb.end(), 0.0);
  if (ta != tb) {
    for (double& v : sb) v *= ta / tb;
  }

  Matrix sub = NetworkSimplex(sa, sb, sc).run();

  TransportPlan out;
  out.plan = Matrix(a.size(), b.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out.plan(rows[i], cols[j]) = sub(i, j);
  }
  out.cost = plan_cost(out.plan, cost);
  out.a.assign(a.begin(), a.end());
  out.b.assign(b.begin(), b.end());
  return out;
}

Matrix squared_cost(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw Error("point sets " + x.shape_string() + " and " + y.shape_string() + " differ in dimension");
  }
  Matrix c(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) c(i, j) = squared_distance(x.row(i), y.row(j));
  }
  return c;
}

double w2_squared(const Matrix& x, const Matrix& y, std::span<const double> a, std::span<const double> b) {
  return solve_emd(a, b, squared_cost(x, y)).cost;
}

double w2_squared(const Matrix& x, const Matrix& y) {
  std::vector<double> a(x.rows(), 1.0 / static_cast<double>(x.rows()));
  std::vector<double> b(y.rows(), 1.0 / static_cast<double>(y.rows()));
  return w2_squared(x, y, a, b);
}

TransportPlan solve_1d_monotone(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error("monotone matching needs equal counts, got " + std::to_string(x.size()) + " and " +
                std::to_string(y.size()));
  }
  if (x.empty()) throw Error("monotone matching of empty samples");
  const std::size_t n = x.size();
  std::vector<std::size_t> ix(n), iy(n);
  std::iota(ix.begin(), ix.end(), 0);
  std::iota(iy.begin(), iy.end(), 0);
  std::stable_sort(ix.begin(), ix.end(), [&](std::size_t p, std::size_t q) { return x[p] < x[q]; });
  std::stable_sort(iy.begin(), iy.end(), [&](std::size_t p, std::size_t q) { return y[p] < y[q]; });
  TransportPlan out;
  const double w = 1.0 / static_cast<double>(n);
  out.plan = Matrix(n, n);
  out.a.assign(n, w);
  out.b.assign(n, w);
  for (std::size_t k = 0; k < n; ++k) {
    out.plan(ix[k], iy[k]) = w;
    const double d = x[ix[k]] - y[iy[k]];
    out.cost += d * d;
  }
  out.cost *= w;
  return out;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent, size;
  std::vector<std::pair<std::size_t, std::size_t>> history;

  explicit UnionFind(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) const {
    while (parent[x] != x) x = parent[x];
    return x;
  }
  bool unite(std::size_t x, std::size_t y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    if (size[x] < size[y]) std::swap(x, y);
    parent[y] = x;
    size[x] += size[y];
    history.emplace_back(x, y);
    return true;
  }
  void undo() {
    auto [x, y] = history.back();
    history.pop_back();
    parent[y] = y;
    size[x] -= size[y];
  }
};

class TreeEnumerator {
 public:
  TreeEnumerator(std::span<const double> a, std::span<const double> b, const Matrix& cost)
      : a_(a), b_(b), cost_(cost), n_(a.size()), m_(b.size()), uf_(n_ + m_) {}

  TransportPlan best() {
    chosen_.clear();
    search(0);
    if (best_plan_.empty()) throw Error("brute force found no feasible vertex");
    TransportPlan out;
    out.plan = best_plan_;
    out.cost = best_cost_;
    out.a.assign(a_.begin(), a_.end());
    out.b.assign(b_.begin(), b_.end());
    return out;
  }

 private:
  void search(std::size_t edge) {
    const std::size_t need = n_ + m_ - 1;
    if (chosen_.size() == need) {
      evaluate();
      return;
    }
    if (n_ * m_ - edge < need - chosen_.size()) return;
    const std::size_t i = edge / m_, j = edge % m_;
    if (uf_.unite(i, n_ + j)) {
      chosen_.push_back(edge);
      search(edge + 1);
      chosen_.pop_back();
      uf_.undo();
    }
    search(edge + 1);
  }

  // Flows on a spanning tree are forced; peel leaves.
  void evaluate() {
    std::vector<double> rest(n_ + m_);
    for (std::size_t i = 0; i < n_; ++i) rest[i] = a_[i];
    for (std::size_t j = 0; j < m_; ++j) rest[n_ + j] = b_[j];
    std::vector<int> degree(n_ + m_, 0);
    for (std::size_t e : chosen_) {
      ++degree[e / m_];
      ++degree[n_ + e % m_];
    }
    std::vector<char> used(chosen_.size(), 0);
    Matrix plan(n_, m_);
    for (std::size_t round = 0; round < chosen_.size(); ++round) {
      bool progressed = false;
      for (std::size_t k = 0; k < chosen_.size() && !progressed; ++k) {
        if (used[k]) continue;
        const std::size_t i = chosen_[k] / m_, j = n_ + chosen_[k] % m_;
        std::size_t leaf, other;
        if (degree[i] == 1) {
          leaf = i;
          other = j;
        } else if (degree[j] == 1) {
          leaf = j;
          other = i;
        } else {
          continue;
        }
        const double f = rest[leaf];
        if (f < -1e-12) return;
        plan(i, j - n_) = std::max(f, 0.0);
        rest[leaf] = 0.0;
        rest[other] -= f;
        --degree[i];
        --degree[j];
        used[k] = 1;
        progressed = true;
      }
      if (!progressed) return;
    }
    const double c = plan_cost(plan, cost_);
    if (best_plan_.empty() || c < best_cost_) {
      best_cost_ = c;
      best_plan_ = plan;
    }
  }

  std::span<const double> a_, b_;
  const Matrix& cost_;
  std::size_t n_, m_;
  UnionFind uf_;
  std::vector<std::size_t> chosen_;
  Matrix best_plan_;
  double best_cost_ = 0.0;
};

}  // namespace

TransportPlan brute_force_emd(std::span<const double> a, std::span<const double> b, const Matrix& cost) {
  check_problem(a, b, cost);
  const std::size_t n = a.size(), m = b.size();
  if (n * m > 36) throw Error("brute force limited to n*m <= 36, got " + std::to_string(n * m));
  bool uniform_square = n == m;
  for (std::size_t k = 0; uniform_square && k < n; ++k) {
    uniform_square = std::abs(a[k] - 1.0 / static_cast<double>(n)) < 1e-15 &&
                     std::abs(b[k] - 1.0 / static_cast<double>(n)) < 1e-15;
  }
  if (!uniform_square) return TreeEnumerator(a, b, cost).best();

  // Birkhoff: an optimal vertex is a permutation matrix.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_perm;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost(i, perm[i]);
    if (c < best) {
      best = c;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  TransportPlan out;
  out.plan = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) out.plan(i, best_perm[i]) = 1.0 / static_cast<double>(n);
  out.cost = plan_cost(out.plan, cost);
  out.a.assign(a.begin(), a.end());
  out.b.assign(b.begin(), b.end());
  return out;
}

}  // namespace sfm
