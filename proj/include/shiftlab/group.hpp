#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shiftlab {

// One element, in the normal form of its group:
//   finite kinds (table, cyclic, dihedral, product): single canonical index
//   lattice Z^d: d coordinates
//   free group: reduced word, letter g>0 means generator g, g<0 its inverse
using Elem = std::vector<std::int64_t>;

enum class GroupKind { table, cyclic, product, dihedral, lattice, free_group };

class Group : public std::enable_shared_from_this<Group> {
 public:
  using Ptr = std::shared_ptr<const Group>;

  static Ptr cyclic(std::int64_t n) {
    if (n < 1) throw std::domain_error("cyclic: n must be >= 1");
    auto g = std::make_shared<Group>(Private{});
    g->kind_ = GroupKind::cyclic;
    g->n_ = n;
    g->order_ = static_cast<std::uint64_t>(n);
    return g;
  }

  static Ptr dihedral(std::int64_t n) {
    if (n < 1) throw std::domain_error("dihedral: n must be >= 1");
    auto g = std::make_shared<Group>(Private{});
    g->kind_ = GroupKind::dihedral;
    g->n_ = n;
    g->order_ = static_cast<std::uint64_t>(2 * n);
    return g;
  }

  static Ptr lattice(int d) {
    if (d < 1) throw std::domain_error("lattice: dimension must be >= 1");
    auto g = std::make_shared<Group>(Private{});
    g->kind_ = GroupKind::lattice;
    g->d_ = d;
    g->order_ = 0;
    return g;
  }

  static Ptr free_group(int rank) {
    if (rank < 1) throw std::domain_error("free group: rank must be >= 1");
    auto g = std::make_shared<Group>(Private{});
    g->kind_ = GroupKind::free_group;
    g->d_ = rank;
    g->order_ = 0;
    return g;
  }

  static Ptr product(std::vector<Ptr> factors) {
    if (factors.empty()) throw std::domain_error("product: needs at least one factor");
    auto g = std::make_shared<Group>(Private{});
    g->kind_ = GroupKind::product;
    std::uint64_t ord = 1;
    for (const auto& f : factors) {
      if (!f) throw std::domain_error("product: null factor");
      if (!f->finite())
        throw std::domain_error("product: only finite factors are supported");
      if (ord > (1ull << 62) / f->order())
        throw std::domain_error("product: order overflow");
      ord *= f->order();
    }
    g->order_ = ord;
    g->factors_ = std::move(factors);
    g->strides_.assign(g->factors_.size(), 1);
    for (std::size_t i = g->factors_.size(); i-- > 1;)
      g->strides_[i - 1] = g->strides_[i] * g->factors_[i]->order();
    return g;
  }

  static Ptr from_table(const std::vector<std::vector<int>>& mul) {
    const std::size_t n = mul.size();
    if (n == 0) throw std::domain_error("table: empty");
    for (const auto& row : mul) {
      if (row.size() != n) throw std::domain_error("table: not square");
      for (int v : row)
        if (v < 0 || static_cast<std::size_t>(v) >= n)
          throw std::domain_error("table: entry out of range");
    }
    for (std::size_t j = 0; j < n; ++j)
      if (mul[0][j] != static_cast<int>(j) || mul[j][0] != static_cast<int>(j))
        throw std::domain_error("table: identity must sit at index 0");
    // Latin square: rows and columns are permutations.
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<bool> row_seen(n, false), col_seen(n, false);
      for (std::size_t j = 0; j < n; ++j) {
        if (row_seen[mul[i][j]]) throw std::domain_error("table: repeated entry in row");
        row_seen[mul[i][j]] = true;
        if (col_seen[mul[j][i]]) throw std::domain_error("table: repeated entry in column");
        col_seen[mul[j][i]] = true;
      }
    }
    // Associativity: full check for small tables, else generator-sampled.
    if (n <= 128) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t c = 0; c < n; ++c)
            if (mul[mul[a][b]][c] != mul[a][mul[b][c]])
              throw std::domain_error("table: not associative");
    } else {
      std::uint64_t h = 0x6a09e667f3bcc908ull;
      for (int t = 0; t < 1 << 20; ++t) {
        h = h * 6364136223846793005ull + 1442695040888963407ull;
        std::size_t a = (h >> 33) % n, b = (h >> 13) % n, c = h % n;
        if (mul[mul[a][b]][c] != mul[a][mul[b][c]])
          throw std::domain_error("table: not associative");
      }
    }
    auto g = std::make_shared<Group>(Private{});
    g->kind_ = GroupKind::table;
    g->order_ = n;
    g->mul_ = mul;
    g->inv_ = std::vector<int>(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        if (mul[i][j] == 0) {
          g->inv_[i] = static_cast<int>(j);
          break;
        }
      if (g->inv_[i] < 0 || mul[g->inv_[i]][i] != 0)
        throw std::domain_error("table: missing inverse");
    }
    return g;
  }

  GroupKind kind() const { return kind_; }
  bool finite() const { return order_ != 0; }
  std::uint64_t order() const {
    if (!finite()) throw std::domain_error("order: group is infinite");
    return order_;
  }
  const std::vector<Ptr>& factors() const { return factors_; }
  std::int64_t cyclic_n() const { return n_; }
  int dimension() const { return d_; }

  Elem identity() const {
    switch (kind_) {
      case GroupKind::lattice:
        return Elem(static_cast<std::size_t>(d_), 0);
      case GroupKind::free_group:
        return Elem{};
      default:
        return Elem{0};
    }
  }

  bool is_identity(const Elem& a) const {
    check_element(a);
    return a == identity();
  }

  void check_element(const Elem& a) const {
    switch (kind_) {
      case GroupKind::table:
      case GroupKind::cyclic:
      case GroupKind::product:
      case GroupKind::dihedral:
        if (a.size() != 1 || a[0] < 0 || static_cast<std::uint64_t>(a[0]) >= order_)
          throw std::domain_error(name() + ": element index out of range");
        return;
      case GroupKind::lattice:
        if (a.size() != static_cast<std::size_t>(d_))
          throw std::domain_error(name() + ": wrong coordinate count");
        return;
      case GroupKind::free_group:
        for (std::size_t i = 0; i < a.size(); ++i) {
          if (a[i] == 0 || a[i] > d_ || a[i] < -d_)
            throw std::domain_error(name() + ": letter out of range");
          if (i + 1 < a.size() && a[i] == -a[i + 1])
            throw std::domain_error(name() + ": word not reduced");
        }
        return;
    }
    throw std::logic_error("unreachable");
  }

  Elem mul(const Elem& a, const Elem& b) const {
    check_element(a);
    check_element(b);
    switch (kind_) {
      case GroupKind::table:
        return Elem{mul_[a[0]][b[0]]};
      case GroupKind::cyclic:
        return Elem{(a[0] + b[0]) % n_};
      case GroupKind::dihedral: {
        auto [r1, s1] = rot_flip(a[0]);
        auto [r2, s2] = rot_flip(b[0]);
        std::int64_t r = s1 == 0 ? (r1 + r2) % n_ : ((r1 - r2) % n_ + n_) % n_;
        return Elem{r + (s1 ^ s2) * n_};
      }
      case GroupKind::product: {
        Elem out{0};
        std::uint64_t ia = static_cast<std::uint64_t>(a[0]);
        std::uint64_t ib = static_cast<std::uint64_t>(b[0]);
        for (std::size_t f = 0; f < factors_.size(); ++f) {
          std::int64_t fa = static_cast<std::int64_t>(ia / strides_[f] % factors_[f]->order());
          std::int64_t fb = static_cast<std::int64_t>(ib / strides_[f] % factors_[f]->order());
          Elem fc = factors_[f]->mul(Elem{fa}, Elem{fb});
          out[0] += fc[0] * static_cast<std::int64_t>(strides_[f]);
        }
        return out;
      }
      case GroupKind::lattice: {
        Elem out(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
        return out;
      }
      case GroupKind::free_group: {
        Elem out(a);
        for (std::int64_t letter : b) {
          if (!out.empty() && out.back() == -letter)
            out.pop_back();
          else
            out.push_back(letter);
        }
        return out;
      }
    }
    throw std::logic_error("unreachable");
  }

  Elem inv(const Elem& a) const {
    check_element(a);
    switch (kind_) {
      case GroupKind::table:
        return Elem{inv_[a[0]]};
      case GroupKind::cyclic:
        return Elem{(n_ - a[0]) % n_};
      case GroupKind::dihedral: {
        auto [r, s] = rot_flip(a[0]);
        return s == 1 ? Elem{a[0]} : Elem{(n_ - r) % n_};
      }
      case GroupKind::product: {
        Elem out{0};
        std::uint64_t ia = static_cast<std::uint64_t>(a[0]);
        for (std::size_t f = 0; f < factors_.size(); ++f) {
          std::int64_t fa = static_cast<std::int64_t>(ia / strides_[f] % factors_[f]->order());
          Elem fi = factors_[f]->inv(Elem{fa});
          out[0] += fi[0] * static_cast<std::int64_t>(strides_[f]);
        }
        return out;
      }
      case GroupKind::lattice: {
        Elem out(a);
        for (auto& c : out) c = -c;
        return out;
      }
      case GroupKind::free_group: {
        Elem out(a.rbegin(), a.rend());
        for (auto& c : out) c = -c;
        return out;
      }
    }
    throw std::logic_error("unreachable");
  }

  // Canonical order: finite kinds by index; Z^d by (max-norm, lexicographic);
  // free groups by (word length, lexicographic with g < g^-1 < next generator).
  bool less(const Elem& a, const Elem& b) const {
    switch (kind_) {
      case GroupKind::lattice: {
        std::int64_t ra = max_norm(a), rb = max_norm(b);
        if (ra != rb) return ra < rb;
        return a < b;
      }
      case GroupKind::free_group: {
        if (a.size() != b.size()) return a.size() < b.size();
        for (std::size_t i = 0; i < a.size(); ++i)
          if (a[i] != b[i]) return letter_key(a[i]) < letter_key(b[i]);
        return false;
      }
      default:
        return a[0] < b[0];
    }
  }

  Elem element_at(std::uint64_t i) const {
    if (!finite()) throw std::domain_error("element_at: group is infinite");
    if (i >= order_) throw std::domain_error("element_at: index out of range");
    return Elem{static_cast<std::int64_t>(i)};
  }

  std::uint64_t index_of(const Elem& a) const {
    if (!finite()) throw std::domain_error("index_of: group is infinite");
    check_element(a);
    return static_cast<std::uint64_t>(a[0]);
  }

  // First `count` elements in canonical order, identity first. Works for the
  // infinite kinds through shell enumeration.
  std::vector<Elem> first_elements(std::size_t count) const {
    std::vector<Elem> out;
    out.reserve(count);
    switch (kind_) {
      case GroupKind::lattice: {
        for (std::int64_t r = 0; out.size() < count; ++r) {
          auto shell = lattice_shell(r);
          for (auto& e : shell) {
            out.push_back(std::move(e));
            if (out.size() == count) break;
          }
        }
        return out;
      }
      case GroupKind::free_group: {
        for (std::size_t len = 0; out.size() < count; ++len) {
          auto words = reduced_words(len);
          for (auto& w : words) {
            out.push_back(std::move(w));
            if (out.size() == count) break;
          }
        }
        return out;
      }
      default: {
        if (count > order_)
          throw std::domain_error("first_elements: count exceeds group order");
        for (std::uint64_t i = 0; i < count; ++i) out.push_back(element_at(i));
        return out;
      }
    }
  }

  std::vector<Elem> nonidentity(std::size_t count) const {
    if (finite() && count > order_ - 1)
      throw std::domain_error("nonidentity: count exceeds group order minus one");
    auto all = first_elements(count + 1);
    return std::vector<Elem>(all.begin() + 1, all.end());
  }

  std::vector<Elem> standard_generators() const {
    switch (kind_) {
      case GroupKind::cyclic:
        return n_ > 1 ? std::vector<Elem>{Elem{1}} : std::vector<Elem>{};
      case GroupKind::dihedral:
        return n_ > 1 ? std::vector<Elem>{Elem{1}, Elem{n_}} : std::vector<Elem>{Elem{1}};
      case GroupKind::lattice: {
        std::vector<Elem> gens;
        for (int i = 0; i < d_; ++i) {
          Elem e(static_cast<std::size_t>(d_), 0);
          e[static_cast<std::size_t>(i)] = 1;
          gens.push_back(std::move(e));
        }
        return gens;
      }
      case GroupKind::free_group: {
        std::vector<Elem> gens;
        for (int i = 1; i <= d_; ++i) gens.push_back(Elem{i});
        return gens;
      }
      case GroupKind::product: {
        std::vector<Elem> gens;
        for (std::size_t f = 0; f < factors_.size(); ++f)
          for (const auto& fg : factors_[f]->standard_generators())
            gens.push_back(Elem{fg[0] * static_cast<std::int64_t>(strides_[f])});
        return gens;
      }
      case GroupKind::table: {
        std::vector<Elem> gens;
        for (std::uint64_t i = 1; i < order_; ++i) gens.push_back(element_at(i));
        return gens;
      }
    }
    throw std::logic_error("unreachable");
  }

  std::string name() const {
    switch (kind_) {
      case GroupKind::cyclic:
        return "Z" + std::to_string(n_);
      case GroupKind::dihedral:
        return "D" + std::to_string(n_);
      case GroupKind::lattice:
        return "Z^" + std::to_string(d_);
      case GroupKind::free_group:
        return "F" + std::to_string(d_);
      case GroupKind::table:
        return "table" + std::to_string(order_);
      case GroupKind::product: {
        std::string s;
        for (std::size_t i = 0; i < factors_.size(); ++i) {
          if (i) s += "x";
          s += factors_[i]->name();
        }
        return s;
      }
    }
    throw std::logic_error("unreachable");
  }

  // Factor index of a product element, for element encodings.
  std::vector<std::int64_t> product_split(const Elem& a) const {
    if (kind_ != GroupKind::product) throw std::domain_error("product_split: not a product");
    check_element(a);
    std::vector<std::int64_t> out;
    std::uint64_t ia = static_cast<std::uint64_t>(a[0]);
    for (std::size_t f = 0; f < factors_.size(); ++f)
      out.push_back(static_cast<std::int64_t>(ia / strides_[f] % factors_[f]->order()));
    return out;
  }

  Elem product_join(const std::vector<std::int64_t>& parts) const {
    if (kind_ != GroupKind::product) throw std::domain_error("product_join: not a product");
    if (parts.size() != factors_.size())
      throw std::domain_error("product_join: wrong factor count");
    Elem out{0};
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      factors_[f]->check_element(Elem{parts[f]});
      out[0] += parts[f] * static_cast<std::int64_t>(strides_[f]);
    }
    return out;
  }

  struct Private {};
  explicit Group(Private) {}

 private:
  std::pair<std::int64_t, std::int64_t> rot_flip(std::int64_t i) const {
    return i < n_ ? std::pair{i, std::int64_t{0}} : std::pair{i - n_, std::int64_t{1}};
  }

  static std::int64_t max_norm(const Elem& a) {
    std::int64_t m = 0;
    for (auto c : a) m = std::max(m, c < 0 ? -c : c);
    return m;
  }

  static std::int64_t letter_key(std::int64_t letter) {
    return letter > 0 ? 2 * (letter - 1) : 2 * (-letter - 1) + 1;
  }

  // All points of max-norm exactly r, in lexicographic order.
  std::vector<Elem> lattice_shell(std::int64_t r) const {
    std::vector<Elem> shell;
    Elem cur(static_cast<std::size_t>(d_), -r);
    for (;;) {
      if (max_norm(cur) == r) shell.push_back(cur);
      std::size_t i = cur.size();
      while (i > 0 && cur[i - 1] == r) --i;
      if (i == 0) return shell;
      ++cur[i - 1];
      for (std::size_t j = i; j < cur.size(); ++j) cur[j] = -r;
    }
  }

  std::vector<Elem> reduced_words(std::size_t len) const {
    std::vector<Elem> out;
    Elem word;
    word.reserve(len);
    reduced_words_rec(len, word, out);
    return out;
  }

  void reduced_words_rec(std::size_t len, Elem& word, std::vector<Elem>& out) const {
    if (word.size() == len) {
      out.push_back(word);
      return;
    }
    // Letters in canonical order: +1, -1, +2, -2, ...
    for (int g = 1; g <= d_; ++g) {
      for (std::int64_t letter : {std::int64_t(g), std::int64_t(-g)}) {
        if (!word.empty() && word.back() == -letter) continue;
        word.push_back(letter);
        reduced_words_rec(len, word, out);
        word.pop_back();
      }
    }
  }

  GroupKind kind_ = GroupKind::cyclic;
  std::int64_t n_ = 0;
  int d_ = 0;
  std::uint64_t order_ = 0;  // 0 means infinite
  std::vector<Ptr> factors_;
  std::vector<std::uint64_t> strides_;
  std::vector<std::vector<int>> mul_;
  std::vector<int> inv_;
};

using GroupPtr = Group::Ptr;

}  // namespace shiftlab
