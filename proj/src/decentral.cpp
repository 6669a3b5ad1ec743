#include "dmpc/decentral.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include "dmpc/errors.hpp"

namespace dmpc {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  void put_vector(const Vector& v) {
    put(static_cast<std::uint32_t>(v.size()));
    for (Index k = 0; k < v.size(); ++k) put(v(k));
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(bytes_[pos_ + b]) << (8 * b);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  Vector get_vector() {
    const auto n = get<std::uint32_t>();
    need(std::size_t{n} * 8);
    Vector v(n);
    for (std::uint32_t k = 0; k < n; ++k) v(k) = get<double>();
    return v;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw MessageFormatError("agent message truncated");
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'D', 'M', 'P', 'C'};
constexpr std::size_t kHeaderSize = 4 + 2 + 4;

}  // namespace

HorizonSolution AgentMessage::unpack() const {
  validate();
  const Index nc = static_cast<Index>(constraint_ids.size());
  HorizonSolution s = HorizonSolution::unflatten(solution, input_dim, nc, steps);
  s.derivative = solution_derivative;
  return s;
}

void AgentMessage::validate() const {
  if (state.size() != state_derivative.size())
    throw MessageFormatError("state and state derivative differ in size");
  if (solution.size() != solution_derivative.size())
    throw MessageFormatError("solution and its derivative differ in size");
  const Index expected = steps * (input_dim + 2 * static_cast<Index>(constraint_ids.size()));
  if (steps <= 0 || input_dim <= 0 || solution.size() != expected)
    throw MessageFormatError("solution size does not match its declared layout");
}

std::vector<std::uint8_t> AgentMessage::encode() const {
  validate();
  Writer w;
  w.put(static_cast<std::int32_t>(agent_id));
  w.put(static_cast<std::int64_t>(round));
  w.put(timestamp);
  w.put_vector(state);
  w.put_vector(state_derivative);
  w.put(static_cast<std::uint32_t>(input_dim));
  w.put(static_cast<std::uint32_t>(steps));
  w.put(static_cast<std::uint32_t>(constraint_ids.size()));
  for (int id : constraint_ids) w.put(static_cast<std::int32_t>(id));
  w.put_vector(solution);
  w.put_vector(solution_derivative);

  Writer out;
  for (char c : kMagic) out.bytes().push_back(static_cast<std::uint8_t>(c));
  out.put(kMessageVersion);
  out.put(static_cast<std::uint32_t>(w.bytes().size()));
  out.bytes().insert(out.bytes().end(), w.bytes().begin(), w.bytes().end());
  return std::move(out.bytes());
}

AgentMessage AgentMessage::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw MessageFormatError("not an agent message");
  Reader header(bytes.subspan(4));
  const auto version = header.get<std::uint16_t>();
  if (version != kMessageVersion)
    throw MessageFormatError("unsupported message version " + std::to_string(version));
  const auto length = header.get<std::uint32_t>();
  if (bytes.size() - kHeaderSize != length)
    throw MessageFormatError("payload length mismatch");

  Reader r(bytes.subspan(kHeaderSize));
  AgentMessage m;
  m.agent_id = r.get<std::int32_t>();
  m.round = static_cast<long>(r.get<std::int64_t>());
  m.timestamp = r.get<double>();
  m.state = r.get_vector();
  m.state_derivative = r.get_vector();
  m.input_dim = r.get<std::uint32_t>();
  m.steps = r.get<std::uint32_t>();
  const auto nc = r.get<std::uint32_t>();
  r.need(std::size_t{nc} * 4);
  for (std::uint32_t k = 0; k < nc; ++k) m.constraint_ids.push_back(r.get<std::int32_t>());
  m.solution = r.get_vector();
  m.solution_derivative = r.get_vector();
  if (r.position() != length) throw MessageFormatError("trailing bytes after agent message");
  m.validate();
  return m;
}

Matrix forecast_trajectory(const AgentMessage& msg, double elapsed, const DynamicsModel& dynamics,
                           const HorizonGrid& grid) {
  const HorizonSolution s = msg.unpack();
  if (s.steps() != grid.steps()) throw LayoutError("message horizon does not match the grid");
  const HorizonSolution rates = HorizonSolution::unflatten(
      msg.solution_derivative, s.input_dim(), s.constraint_count(), s.steps());
  const Vector x = msg.state + elapsed * msg.state_derivative;
  const Matrix u = s.controls + elapsed * rates.controls;
  return predict_horizon(x, u, dynamics, grid);
}

ExogenousStates predict_neighbors(const std::map<int, AgentMessage>& messages, double dt,
                                  const HorizonGrid& grid,
                                  std::span<const std::shared_ptr<const DynamicsModel>> dynamics) {
  ExogenousStates out;
  std::optional<double> stamp;
  for (const auto& [id, msg] : messages) {
    if (stamp && *stamp != msg.timestamp)
      throw ProtocolGap(id, msg.round, "messages from different rounds mixed in one prediction");
    stamp = msg.timestamp;
    if (id < 0 || id >= static_cast<int>(dynamics.size()))
      throw LayoutError("message from unknown agent " + std::to_string(id));
    out[id] = forecast_trajectory(msg, dt, *dynamics[id], grid);
  }
  return out;
}

NeighborForecast::NeighborForecast(std::map<int, AgentMessage> messages, double round_time,
                                   double dt, HorizonGrid grid,
                                   std::vector<std::shared_ptr<const DynamicsModel>> dynamics)
    : messages_(std::move(messages)),
      round_time_(round_time),
      dt_(dt),
      grid_(grid),
      dynamics_(std::move(dynamics)) {}

ExogenousStates NeighborForecast::sample(double t) const {
  // Messages were sent one sample before the round; the offset from the round
  // time is added separately so that sample(round_time) uses exactly dt.
  const double elapsed = dt_ + (t - round_time_);
  ExogenousStates out;
  for (const auto& [id, msg] : messages_)
    out[id] = forecast_trajectory(msg, elapsed, *dynamics_.at(id), grid_);
  return out;
}

SubproblemSpec build_subproblem(const MultiAgentProblem& problem, int owner,
                                const ActivationSet& activation,
                                std::shared_ptr<const ExogenousSource> source, double t) {
  SubproblemSpec spec;
  spec.owner = owner;
  for (int id : activation.active_ids()) {
    if (!problem.constraint(id).involves(owner))
      throw SubproblemError("constraint " + std::to_string(id) + " does not involve agent " +
                            std::to_string(owner));
    spec.coupling_set.push_back(id);
  }

  std::vector<int> neighbours;
  for (int id : spec.coupling_set)
    for (int p : problem.constraint(id).participants())
      if (p != owner && std::find(neighbours.begin(), neighbours.end(), p) == neighbours.end())
        neighbours.push_back(p);
  std::sort(neighbours.begin(), neighbours.end());

  OcpDefinition& def = spec.definition;
  def.grid = problem.grid;
  def.barrier_weight = problem.barrier_weight;
  def.activation_threshold = problem.activation_threshold;
  def.agents.push_back({owner, problem.dynamics[owner], problem.costs[owner], true});
  for (int p : neighbours) def.agents.push_back({p, problem.dynamics[p], nullptr, false});
  for (const auto& c : problem.constraints)
    if (std::find(spec.coupling_set.begin(), spec.coupling_set.end(), c->id()) !=
        spec.coupling_set.end())
      def.constraints.push_back(c);

  if (!neighbours.empty()) {
    if (!source)
      throw SubproblemError("agent " + std::to_string(owner) +
                            " has enforced couplings but no neighbour forecast");
    def.exogenous = std::move(source);
    spec.exogenous = def.exogenous->sample(t);
    for (int p : neighbours) {
      auto it = spec.exogenous.find(p);
      if (it == spec.exogenous.end() || it->second.rows() != problem.dynamics[p]->state_dim() ||
          it->second.cols() < problem.grid.steps() + 1)
        throw SubproblemError("no predicted trajectory of agent " + std::to_string(p) +
                              " for the subproblem of agent " + std::to_string(owner));
    }
  }
  return spec;
}

void LockstepBus::post(AgentMessage msg) {
  std::lock_guard lock(mutex_);
  const int id = msg.agent_id;
  if (pending_.count(id) != 0)
    throw ProtocolGap(id, msg.round, "agent " + std::to_string(id) + " posted twice in one round");
  pending_.emplace(id, std::move(msg));
  ++posted_;
}

std::map<int, AgentMessage> LockstepBus::deliver() {
  std::lock_guard lock(mutex_);
  std::map<int, AgentMessage> out;
  out.swap(pending_);
  delivered_ += static_cast<long>(out.size());
  return out;
}

long LockstepBus::posted() const {
  std::lock_guard lock(mutex_);
  return posted_;
}

long LockstepBus::delivered() const {
  std::lock_guard lock(mutex_);
  return delivered_;
}

namespace {

AgentMessage slice_message(const MultiAgentProblem& pb, const CentralizedController& ctl,
                           const SampleRecord& rec, int agent, std::span<const int> cids) {
  const SolutionLayout whole{[&] {
                               std::vector<int> all(pb.agent_count());
                               std::iota(all.begin(), all.end(), 0);
                               return all;
                             }(),
                             ctl.last_enforced()};
  const HorizonSolution part =
      slice_solution(pb, ctl.last_applied(), whole, {{agent}, {cids.begin(), cids.end()}});
  AgentMessage m;
  m.agent_id = agent;
  m.round = 0;
  m.timestamp = rec.time;
  m.state = rec.states[agent];
  m.state_derivative = ctl.last_state_derivatives()[agent];
  m.input_dim = part.input_dim();
  m.steps = part.steps();
  m.constraint_ids.assign(cids.begin(), cids.end());
  m.solution = part.flatten();
  m.solution_derivative = part.derivative;
  return m;
}

std::vector<int> involving(const MultiAgentProblem& pb, std::span<const int> ids, int agent) {
  std::vector<int> out;
  for (int id : ids)
    if (pb.constraint(id).involves(agent)) out.push_back(id);
  return out;
}

struct AgentWork {
  AgentRuntime next;
  AgentMessage message;
  Vector input;
};

AgentWork agent_round(const DecentralizedFleet& fleet, const AgentRuntime& current,
                      const ProtocolRound& previous, double t) {
  const auto& pb = *fleet.problem;
  const double dt = fleet.cfg.sample_time;
  const int i = current.id;
  const int n = pb.agent_count();

  AgentWork work;
  AgentRuntime& ag = work.next;
  ag = current;
  ag.last = {};

  std::map<int, AgentMessage> neighbours;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    auto it = previous.inbox.find(j);
    if (it == previous.inbox.end())
      throw ProtocolGap(i, previous.index,
                        "agent " + std::to_string(i) + " has no message from agent " +
                            std::to_string(j) + " for round " + std::to_string(previous.index));
    if (it->second.round != previous.index || it->second.timestamp != previous.time)
      throw ProtocolGap(i, previous.index,
                        "message of agent " + std::to_string(j) + " belongs to round " +
                            std::to_string(it->second.round));
    neighbours.emplace(j, it->second);
    ++ag.last.consumed;
  }

  // Neighbour states now, extrapolated from the previous round.
  std::vector<Vector> states(n);
  states[i] = ag.state;
  for (const auto& [j, msg] : neighbours) states[j] = msg.state + dt * msg.state_derivative;
  const std::vector<int> own_ids = pb.constraints_of(i);
  auto update = activation_update(current_gaps(pb, states, own_ids),
                                  pb.activation_params(fleet.cfg.slack_floor), ag.activation, t);
  for (auto& v : update.violations) ag.last.warnings.push_back(std::move(v));
  ag.activation = std::move(update.set);
  const std::vector<int> enforced = ag.activation.active_ids();

  std::map<int, AgentMessage> needed;
  for (int id : enforced)
    for (int p : pb.constraint(id).participants())
      if (p != i) needed.emplace(p, neighbours.at(p));
  std::shared_ptr<const ExogenousSource> source;
  if (!needed.empty())
    source = std::make_shared<NeighborForecast>(std::move(needed), t, dt, pb.grid, pb.dynamics);
  const SubproblemSpec spec = build_subproblem(pb, i, ag.activation, source, t);

  if (enforced != ag.enforced) {
    const Matrix gaps =
        horizon_gaps(spec.definition, ag.state, ag.solver.solution.controls, spec.exogenous);
    ag.solver.solution = relayout_solution(ag.solver.solution, ag.enforced, enforced, gaps,
                                           pb.barrier_weight, fleet.cfg.slack_floor);
    ag.enforced = enforced;
  }

  work.input = ag.solver.solution.controls.col(0);
  const Vector xdot = (*pb.dynamics[i])(ag.state, work.input);
  const SolverState res = continuation_step(spec.definition, ag.solver, ag.state, xdot, t, fleet.cfg);

  AgentMessage& m = work.message;
  m.agent_id = i;
  m.round = previous.index + 1;
  m.timestamp = t;
  m.state = ag.state;
  m.state_derivative = xdot;
  m.input_dim = ag.solver.solution.input_dim();
  m.steps = ag.solver.solution.steps();
  m.constraint_ids = enforced;
  m.solution = ag.solver.solution.flatten();
  m.solution_derivative = res.solution.derivative;

  ag.last.residual = scaled_residual(res.residual_norm, spec.definition.unknown_dim());
  ag.last.gmres_iters = res.last_gmres_iters;
  ag.last.wall_time = res.wall_time_last_step;
  ag.last.multiplier_error = agent_multiplier_error(pb, ag.solver.solution, enforced, i);
  if (!res.warning.empty()) ag.last.warnings.push_back(res.warning);

  ag.state += dt * xdot;
  ag.solver = res;
  return work;
}

}  // namespace

FleetStart initialize_fleet(std::shared_ptr<const MultiAgentProblem> problem,
                            const SolverConfig& cfg, double t0, int workers,
                            std::uint64_t order_seed) {
  CentralizedController ctl(problem, cfg);
  ctl.initialize(t0);
  SampleRecord rec = ctl.step(t0);
  const auto& pb = *problem;

  FleetStart start;
  DecentralizedFleet& fleet = start.fleet;
  fleet.problem = problem;
  fleet.cfg = cfg;
  fleet.workers = std::max(1, workers);
  fleet.order_seed = order_seed;
  fleet.start_time = t0;

  std::vector<int> all(pb.agent_count());
  std::iota(all.begin(), all.end(), 0);
  const SolutionLayout whole{all, ctl.last_enforced()};
  for (int i = 0; i < pb.agent_count(); ++i) {
    const std::vector<int> cids = involving(pb, ctl.last_enforced(), i);
    AgentRuntime ag;
    ag.id = i;
    ag.state = ctl.states()[i];
    ag.enforced = cids;
    ag.solver.solution = slice_solution(pb, ctl.solution(), whole, {{i}, cids});
    ag.solver.residual_norm = rec.residuals[i];
    for (const auto& change : ctl.activation().history())
      if (pb.constraint(change.constraint_id).involves(i))
        ag.activation.set(change.constraint_id, change.flag, change.time);
    for (int id : pb.constraints_of(i))
      if (!ag.activation.known(id)) ag.activation.set(id, false, t0);
    ag.last.residual = rec.residuals[i];
    ag.last.gmres_iters = rec.gmres_iters[i];
    ag.last.wall_time = rec.wall_times[i];
    ag.last.multiplier_error = rec.multiplier_errors[i];
    start.round.inbox.emplace(i, slice_message(pb, ctl, rec, i, cids));
    fleet.agents.push_back(std::move(ag));
  }
  fleet.messages_produced = pb.agent_count();
  start.round.index = 0;
  start.round.time = t0;
  start.round.phase = RoundPhase::broadcast;
  start.record = std::move(rec);
  return start;
}

RoundResult run_round(DecentralizedFleet& fleet, const ProtocolRound& previous, LockstepBus& bus) {
  const auto& pb = *fleet.problem;
  const int n = pb.agent_count();
  const long index = previous.index + 1;
  const double t = fleet.start_time + static_cast<double>(index) * fleet.cfg.sample_time;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(fleet.order_seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index)));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::optional<AgentWork>> results(n);
  std::vector<std::string> failures(n);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= order.size()) return;
      const int a = order[k];
      try {
        results[a] = agent_round(fleet, fleet.agents[a], previous, t);
      } catch (const std::exception& e) {
        failures[a] = e.what();
        if (failures[a].empty()) failures[a] = "unknown failure";
      }
    }
  };
  const int threads = std::min(fleet.workers, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  }

  for (int a = 0; a < n; ++a)
    if (!results[a])
      throw RoundAborted(a, "round " + std::to_string(index) + " aborted, agent " +
                                std::to_string(a) + ": " + failures[a]);

  RoundResult out;
  SampleRecord& rec = out.record;
  rec.time = t;
  rec.states.resize(n);
  rec.inputs.resize(n);
  rec.residuals.resize(n);
  rec.gmres_iters.resize(n);
  rec.multiplier_errors.resize(n);
  rec.wall_times.resize(n);
  for (int a = 0; a < n; ++a) {
    AgentWork& w = *results[a];
    rec.states[a] = w.message.state;
    rec.inputs[a] = w.input;
    rec.residuals[a] = w.next.last.residual;
    rec.gmres_iters[a] = w.next.last.gmres_iters;
    rec.multiplier_errors[a] = w.next.last.multiplier_error;
    rec.wall_times[a] = w.next.last.wall_time;
    rec.wall_total += w.next.last.wall_time;
    for (const auto& msg : w.next.last.warnings)
      rec.warnings.push_back("agent " + std::to_string(a + 1) + ": " + msg);
    fleet.messages_consumed += w.next.last.consumed;
    bus.post(std::move(w.message));
    fleet.agents[a] = std::move(w.next);
  }
  for (const auto& c : pb.constraints) {
    rec.gaps.push_back(constraint_gap(*c, rec.states));
    for (int p : c->participants())
      rec.flags.push_back(fleet.agents[p].activation.active(c->id()) ? 1 : 0);
  }
  fleet.messages_produced += n;

  out.round.index = index;
  out.round.time = t;
  out.round.inbox = bus.deliver();
  out.round.phase = RoundPhase::broadcast;
  return out;
}

}  // namespace dmpc
