#ifndef SWARM_AGENT_STORE_HPP
#define SWARM_AGENT_STORE_HPP

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swarm/error.hpp"
#include "swarm/geometry.hpp"

namespace swarm {

/// Handle to an extra per-agent scalar column registered on a store.
struct AttributeId {
  std::size_t index;
};

template <std::floating_point Real>
class BasicAgentStore;

/// Read-only view of one agent in the committed (read) half of a store.
template <std::floating_point Real>
class BasicAgentRef {
 public:
  BasicAgentRef(const BasicAgentStore<Real>& store, std::size_t i) : store_(&store), i_(i) {}

  std::size_t index() const { return i_; }
  BasicVec2<Real> position() const { return {store_->read_.x[i_], store_->read_.y[i_]}; }
  Real heading() const { return store_->read_.heading[i_]; }
  Real speed() const { return store_->read_.speed[i_]; }
  std::uint8_t type() const { return store_->type_[i_]; }
  Real attr(AttributeId a) const { return store_->read_.extra[a.index][i_]; }

 private:
  const BasicAgentStore<Real>* store_;
  std::size_t i_;
};

/// Mutable view of one agent in the pending (write) half of a store.
/// Reads through a writer return the pending value, which lets callbacks
/// accumulate into their own agent across several invocations.
template <std::floating_point Real>
class BasicAgentWriter {
 public:
  BasicAgentWriter(BasicAgentStore<Real>& store, std::size_t i) : store_(&store), i_(i) {}

  std::size_t index() const { return i_; }

  BasicVec2<Real> position() const { return {store_->write_.x[i_], store_->write_.y[i_]}; }
  void set_position(BasicVec2<Real> p) {
    store_->write_.x[i_] = p.x;
    store_->write_.y[i_] = p.y;
  }
  Real heading() const { return store_->write_.heading[i_]; }
  void set_heading(Real h) { store_->write_.heading[i_] = h; }
  Real speed() const { return store_->write_.speed[i_]; }
  void set_speed(Real s) { store_->write_.speed[i_] = s; }
  Real attr(AttributeId a) const { return store_->write_.extra[a.index][i_]; }
  void set_attr(AttributeId a, Real v) { store_->write_.extra[a.index][i_] = v; }
  void add_attr(AttributeId a, Real v) { store_->write_.extra[a.index][i_] += v; }

 private:
  BasicAgentStore<Real>* store_;
  std::size_t i_;
};

/// Structure-of-arrays agent state with a committed read half and a
/// pending write half. Interactions read from the former and write to the
/// latter; commit() publishes the pending state. The type tag is fixed
/// outside interactions and is not double-buffered.
template <std::floating_point Real>
class BasicAgentStore {
 public:
  using real_type = Real;
  using vec_type = BasicVec2<Real>;
  using world_type = BasicWorldSpec<Real>;
  using ref_type = BasicAgentRef<Real>;
  using writer_type = BasicAgentWriter<Real>;

  BasicAgentStore(std::size_t n, world_type world) : world_(world), n_(n), type_(n, 0) {
    world_.validate();
    for (auto* c : {&read_, &write_}) {
      c->x.assign(n, Real(0));
      c->y.assign(n, Real(0));
      c->heading.assign(n, Real(0));
      c->speed.assign(n, Real(0));
    }
  }

  std::size_t size() const { return n_; }
  const world_type& world() const { return world_; }

  AttributeId add_attribute(std::string name, Real initial = Real(0)) {
    for (const auto& existing : names_)
      if (existing == name) throw ConfigError("attribute", "duplicate attribute '" + name + "'");
    names_.push_back(std::move(name));
    read_.extra.emplace_back(n_, initial);
    write_.extra.emplace_back(n_, initial);
    return {names_.size() - 1};
  }

  AttributeId attribute(std::string_view name) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
      if (names_[k] == name) return {k};
    throw ConfigError("attribute", "unknown attribute '" + std::string(name) + "'");
  }

  const std::vector<std::string>& attribute_names() const { return names_; }

  /// Sets an agent's state in both halves. Only valid outside interactions.
  void set_agent(std::size_t i, vec_type position, Real heading, Real speed) {
    check_index(i);
    position = world_.wrap(position);
    heading = normalize_angle(heading);
    for (auto* c : {&read_, &write_}) {
      c->x[i] = position.x;
      c->y[i] = position.y;
      c->heading[i] = heading;
      c->speed[i] = speed;
    }
  }

  void set_attribute(AttributeId a, std::size_t i, Real v) {
    check_index(i);
    read_.extra[a.index][i] = v;
    write_.extra[a.index][i] = v;
  }

  void set_type(std::size_t i, std::uint8_t tag) {
    check_index(i);
    type_[i] = tag;
  }

  ref_type agent(std::size_t i) const { return ref_type(*this, i); }
  writer_type writer(std::size_t i) { return writer_type(*this, i); }

  std::span<const Real> x() const { return read_.x; }
  std::span<const Real> y() const { return read_.y; }
  std::span<const Real> heading() const { return read_.heading; }
  std::span<const Real> speed() const { return read_.speed; }
  std::span<const std::uint8_t> types() const { return type_; }
  std::span<const Real> attribute_values(AttributeId a) const { return read_.extra[a.index]; }
  vec_type position(std::size_t i) const { return {read_.x[i], read_.y[i]}; }

  /// Publishes the write half: positions are wrapped into the world and
  /// headings normalised to [0, 2pi), then both halves hold the same state.
  void commit() {
    for (std::size_t i = 0; i < n_; ++i) {
      write_.x[i] = world_type::wrap_coord(write_.x[i], world_.width);
      write_.y[i] = world_type::wrap_coord(write_.y[i], world_.height);
      write_.heading[i] = normalize_angle(write_.heading[i]);
    }
    read_ = write_;
  }

 private:
  friend class BasicAgentRef<Real>;
  friend class BasicAgentWriter<Real>;

  struct Columns {
    std::vector<Real> x, y, heading, speed;
    std::vector<std::vector<Real>> extra;
  };

  void check_index(std::size_t i) const {
    if (i >= n_) throw InvariantViolation("agent index " + std::to_string(i) + " out of range");
  }

  world_type world_;
  std::size_t n_;
  Columns read_;
  Columns write_;
  std::vector<std::uint8_t> type_;
  std::vector<std::string> names_;
};

using AgentStore = BasicAgentStore<float>;
using AgentRef = BasicAgentRef<float>;
using AgentWriter = BasicAgentWriter<float>;

}  // namespace swarm

#endif  // SWARM_AGENT_STORE_HPP
