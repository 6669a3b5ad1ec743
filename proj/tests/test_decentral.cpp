#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dmpc/decentral.hpp"
#include "dmpc/errors.hpp"
#include "dmpc/models.hpp"
#include "dmpc/runner.hpp"
#include "dmpc/scenario.hpp"

using namespace dmpc;

namespace {

AgentMessage sample_message() {
  AgentMessage m;
  m.agent_id = 3;
  m.round = 17;
  m.timestamp = 0.34;
  m.state = (Vector(3) << 1.5, -0.25, 0.01).finished();
  m.state_derivative = (Vector(3) << 24.0, 0.1, -0.002).finished();
  m.input_dim = 2;
  m.steps = 2;
  m.constraint_ids = {4, 9};
  m.solution = Vector::LinSpaced(12, -1.0, 2.0);
  m.solution_derivative = Vector::LinSpaced(12, 0.5, 0.7);
  return m;
}

/// A vehicle message at trim: lane keeping at v_target, frozen.
AgentMessage trim_message(int id, double s, double v, int steps) {
  AgentMessage m;
  m.agent_id = id;
  m.state = (Vector(3) << s, 0.0, 0.0).finished();
  m.state_derivative = Vector::Zero(3);
  m.input_dim = 2;
  m.steps = steps;
  HorizonSolution sol(2, 0, steps);
  sol.controls.row(0).setConstant(v);
  sol.controls.row(1).setZero();
  m.solution = sol.flatten();
  m.solution_derivative = Vector::Zero(m.solution.size());
  return m;
}

driving::ScenarioConfig single_agent() {
  auto sc = driving::scenario_preset("two_agent");
  sc.name = "single";
  sc.agents.resize(1);
  sc.agents[0].start.y = 0.8;  // something to correct
  sc.duration = 2.0;
  return sc;
}

void check_same_states(const TrajectoryLog& a, const TrajectoryLog& b, double tol) {
  REQUIRE(a.samples.size() == b.samples.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.samples.size(); ++k)
    for (std::size_t i = 0; i < a.samples[k].states.size(); ++i) {
      worst = std::max(worst, (a.samples[k].states[i] - b.samples[k].states[i]).cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.samples[k].inputs[i] - b.samples[k].inputs[i]).cwiseAbs().maxCoeff());
    }
  CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("agent message wire round trip") {
  const AgentMessage m = sample_message();
  const auto bytes = m.encode();
  CHECK(bytes.size() == 10 + 4 + 8 + 8 + (4 + 24) * 2 + 4 + 4 + 4 + 8 + (4 + 96) * 2);
  CHECK(bytes[0] == 'D');
  CHECK(bytes[4] == 1);  // version, little endian
  const AgentMessage back = AgentMessage::decode(bytes);
  CHECK(back.agent_id == 3);
  CHECK(back.round == 17);
  CHECK(back.timestamp == 0.34);
  CHECK(back.state == m.state);
  CHECK(back.state_derivative == m.state_derivative);
  CHECK(back.constraint_ids == m.constraint_ids);
  CHECK(back.solution == m.solution);
  CHECK(back.solution_derivative == m.solution_derivative);
  CHECK(back.encode() == bytes);

  const HorizonSolution s = back.unpack();
  CHECK(s.constraint_count() == 2);
  CHECK(s.controls(1, 0) == m.solution(1));
  CHECK(s.derivative == m.solution_derivative);
}

TEST_CASE("malformed messages are rejected") {
  const auto good = sample_message().encode();
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(AgentMessage::decode(bad), MessageFormatError);
  bad = good;
  bad[4] = 9;
  CHECK_THROWS_AS(AgentMessage::decode(bad), MessageFormatError);
  bad = good;
  bad.pop_back();
  CHECK_THROWS_AS(AgentMessage::decode(bad), MessageFormatError);
  bad = good;
  bad.push_back(0);
  CHECK_THROWS_AS(AgentMessage::decode(bad), MessageFormatError);
  CHECK_THROWS_AS(AgentMessage::decode(std::vector<std::uint8_t>{}), MessageFormatError);

  AgentMessage m = sample_message();
  m.solution.conservativeResize(11);
  CHECK_THROWS_AS(m.encode(), MessageFormatError);
  m = sample_message();
  m.state_derivative = Vector::Zero(2);
  CHECK_THROWS_AS(m.encode(), MessageFormatError);
}

TEST_CASE("neighbour prediction") {
  const HorizonGrid grid(2.0, 20);
  const std::vector<std::shared_ptr<const DynamicsModel>> dyn(
      3, std::make_shared<driving::VehicleModel>());

  SUBCASE("a frozen neighbour is the rollout of its unchanged solution") {
    AgentMessage m = trim_message(1, 30.0, 20.0, 20);
    m.solution(1) = 0.05;  // some steering on step 0
    const auto pred = predict_neighbors({{1, m}}, 0.02, grid, dyn);
    const Matrix ref = predict_horizon(m.state, m.unpack().controls, *dyn[1], grid);
    CHECK(pred.at(1) == ref);
  }

  SUBCASE("a neighbour at trim moves uniformly") {
    AgentMessage m = trim_message(2, 100.0, 24.0, 20);
    m.state_derivative = (Vector(3) << 24.0, 0.0, 0.0).finished();
    const Matrix x = predict_neighbors({{2, m}}, 0.02, grid, dyn).at(2);
    for (Index k = 0; k <= 20; ++k) {
      CHECK(x(0, k) == doctest::Approx(100.0 + 24.0 * 0.02 + 24.0 * 0.1 * k));
      CHECK(x(1, k) == 0.0);
    }
  }

  SUBCASE("messages from two rounds cannot be mixed") {
    AgentMessage a = trim_message(1, 0.0, 20.0, 20), b = trim_message(2, 50.0, 20.0, 20);
    b.timestamp = 0.02;
    b.round = 1;
    CHECK_THROWS_AS(predict_neighbors({{1, a}, {2, b}}, 0.02, grid, dyn), ProtocolGap);
  }
}

TEST_CASE("prediction matches the neighbour's own continuation update") {
  auto sc = driving::scenario_preset("two_agent");
  const auto pb = make_problem(sc);
  const auto cfg = solver_config(sc);
  FleetStart start = initialize_fleet(pb, cfg, 0.0);
  LockstepBus bus;
  auto round = std::move(start.round);
  for (int k = 0; k < 5; ++k) round = run_round(start.fleet, round, bus).round;

  // Agent 2's forecast of agent 1 versus agent 1's own next solution and state.
  const AgentMessage& msg = round.inbox.at(0);
  const Matrix predicted =
      predict_neighbors({{0, msg}}, cfg.sample_time, pb->grid, pb->dynamics).at(0);
  const AgentRuntime& self = start.fleet.agents[0];
  const Matrix own = predict_horizon(self.state, self.solver.solution.controls, *pb->dynamics[0], pb->grid);
  CHECK((predicted - own).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("subproblem construction") {
  const auto pb = make_problem(driving::scenario_preset("five_agent"));
  std::vector<Vector> states = pb->initial_states;
  ExogenousStates trajectories;
  for (int j = 0; j < 5; ++j)
    trajectories[j] = Matrix::Zero(3, 21).colwise() + states[j];
  const auto source = std::make_shared<ConstantExogenous>(trajectories);

  SUBCASE("no enforced couplings") {
    ActivationSet none;
    const auto spec = build_subproblem(*pb, 0, none, nullptr, 0.0);
    CHECK(spec.coupling_set.empty());
    CHECK(spec.definition.unknown_dim() == 20 * 2);
    CHECK(spec.definition.agents.size() == 1);
    CHECK(spec.exogenous.empty());
  }

  SUBCASE("one coupling") {
    ActivationSet one;
    one.set(1, true, 0.0);
    const auto spec = build_subproblem(*pb, 0, one, source, 0.0);
    CHECK(spec.definition.unknown_dim() == 20 * (2 + 2));
    REQUIRE(spec.definition.agents.size() == 2);
    CHECK_FALSE(spec.definition.agents[1].optimized);
  }

  SUBCASE("two couplings of agent 1") {
    ActivationSet two;
    two.set(2, true, 0.0);
    two.set(3, true, 0.0);
    two.set(4, false, 0.0);
    const auto spec = build_subproblem(*pb, 0, two, source, 0.0);
    CHECK(spec.coupling_set == std::vector<int>{2, 3});
    CHECK(spec.definition.constraint_ids() == std::vector<int>{2, 3});
    CHECK(spec.definition.unknown_dim() == 20 * (2 + 4));
    CHECK(spec.exogenous.count(2) == 1);
    CHECK(spec.exogenous.count(3) == 1);
  }

  SUBCASE("coverage gaps") {
    ActivationSet one;
    one.set(1, true, 0.0);
    CHECK_THROWS_AS(build_subproblem(*pb, 0, one, nullptr, 0.0), SubproblemError);
    ExogenousStates partial = trajectories;
    partial.erase(1);
    CHECK_THROWS_AS(build_subproblem(*pb, 0, one, std::make_shared<ConstantExogenous>(partial), 0.0),
                    SubproblemError);
    ActivationSet foreign;
    foreign.set(5, true, 0.0);  // agents 2 and 3
    CHECK_THROWS_AS(build_subproblem(*pb, 0, foreign, source, 0.0), SubproblemError);
  }
}

TEST_CASE("lockstep bus") {
  LockstepBus bus;
  bus.post(trim_message(0, 0.0, 20.0, 2));
  bus.post(trim_message(1, 0.0, 20.0, 2));
  CHECK_THROWS_AS(bus.post(trim_message(1, 5.0, 20.0, 2)), ProtocolGap);
  const auto out = bus.deliver();
  CHECK(out.size() == 2);
  CHECK(bus.deliver().empty());
  CHECK(bus.posted() == 2);
  CHECK(bus.delivered() == 2);
}

TEST_CASE("fleet initialization slices the joint solution") {
  auto sc = driving::scenario_preset("two_agent");
  sc.agents[0].start.s = 0.0;
  sc.agents[1].start.s = 60.0;
  const auto pb = make_problem(sc);
  const FleetStart start = initialize_fleet(pb, solver_config(sc), 0.0);
  REQUIRE(start.fleet.agents.size() == 2);
  CHECK(start.round.inbox.size() == 2);
  CHECK(start.round.index == 0);
  for (const auto& ag : start.fleet.agents) {
    CHECK(ag.enforced == std::vector<int>{1});
    CHECK(ag.activation.active(1));
    CHECK(ag.solver.solution.min_slack() > 0.0);
  }
  // both copies start from the same joint multiplier row
  CHECK(start.fleet.agents[0].solver.solution.multipliers ==
        start.fleet.agents[1].solver.solution.multipliers);

  CentralizedController ctl(pb, solver_config(sc));
  ctl.initialize(0.0);
  ctl.step(0.0);
  const SolutionLayout whole = ctl.layout();
  HorizonSolution joint = ctl.solution();
  joint.controls.setZero();
  joint.slacks.setZero();
  joint.multipliers.setZero();
  joint.derivative.setZero();
  for (int i = 0; i < 2; ++i)
    scatter_solution(*pb, joint, whole, start.fleet.agents[i].solver.solution, {{i}, {1}});
  CHECK(joint.flatten() == ctl.solution().flatten());
  CHECK(joint.derivative == ctl.solution().derivative);
}

TEST_CASE("a single agent reproduces the centralized run bit for bit") {
  const auto sc = single_agent();
  const auto central = centralized_solve_run(sc);
  const auto decentral = decentralized_run(sc);
  check_same_states(central, decentral, 0.0);
}

TEST_CASE("distant agents run as independent single-agent problems") {
  auto sc = driving::scenario_preset("two_agent");
  sc.agents[0].cost.v_target = 24.0;
  sc.agents[0].start.s = 0.0;
  sc.agents[1].start.s = 500.0;
  sc.duration = 4.0;
  const auto decentral = decentralized_run(sc);
  for (const auto& s : decentral.samples) CHECK(s.flags == std::vector<std::uint8_t>{0, 0});
  check_same_states(centralized_solve_run(sc), decentral, 1e-9);

  for (int i = 0; i < 2; ++i) {
    auto alone = sc;
    alone.agents = {sc.agents[i]};
    const auto solo = centralized_solve_run(alone);
    double worst = 0.0;
    for (std::size_t k = 0; k < solo.samples.size(); ++k)
      worst = std::max(worst, (solo.samples[k].states[0] - decentral.samples[k].states[i]).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("rounds conserve messages and keep multiplier copies consistent") {
  auto sc = driving::scenario_preset("two_agent");
  sc.agents[0].start.s = 0.0;
  sc.agents[1].start.s = 60.0;
  const auto pb = make_problem(sc);
  const auto cfg = solver_config(sc);
  FleetStart start = initialize_fleet(pb, cfg, 0.0);
  LockstepBus bus;
  auto round = std::move(start.round);
  const int n = pb->agent_count();
  const double tau = 1e-3;
  int compared = 0;
  double worst = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const long consumed_before = start.fleet.messages_consumed;
    const long produced_before = start.fleet.messages_produced;
    auto result = run_round(start.fleet, round, bus);
    round = std::move(result.round);
    CHECK(round.index == k);
    CHECK(round.inbox.size() == static_cast<std::size_t>(n));
    CHECK(start.fleet.messages_consumed - consumed_before == n * (n - 1));
    CHECK(start.fleet.messages_produced - produced_before == n);

    const auto& a = start.fleet.agents[0];
    const auto& b = start.fleet.agents[1];
    if (a.enforced == std::vector<int>{1} && b.enforced == a.enforced &&
        a.last.residual <= tau && b.last.residual <= tau) {
      ++compared;
      worst = std::max(worst, (a.solver.solution.multipliers - b.solver.solution.multipliers)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  CHECK(bus.posted() == 100L * n);
  CHECK(bus.delivered() == bus.posted());
  CHECK(compared > 0);
  CHECK(worst <= 10.0 * tau);
}

TEST_CASE("lockstep determinism across worker counts and orderings") {
  auto sc = driving::scenario_preset("five_agent");
  sc.duration = 1.0;
  RunOptions base;
  const auto ref = decentralized_run(sc, base);
  for (int workers : {2, 5}) {
    for (std::uint64_t seed : {1ULL, 99ULL}) {
      RunOptions o;
      o.workers = workers;
      o.seed = seed;
      const auto run = decentralized_run(sc, o);
      CAPTURE(workers);
      CAPTURE(seed);
      check_same_states(ref, run, 0.0);
      CHECK(run.samples.back().residuals == ref.samples.back().residuals);
    }
  }
}

TEST_CASE("a missing neighbour message aborts the round") {
  auto sc = driving::scenario_preset("two_agent");
  const auto pb = make_problem(sc);
  FleetStart start = initialize_fleet(pb, solver_config(sc), 0.0);
  ProtocolRound broken = start.round;
  broken.inbox.erase(1);
  LockstepBus bus;
  const auto before = start.fleet.agents[0].state;
  try {
    run_round(start.fleet, broken, bus);
    FAIL("expected RoundAborted");
  } catch (const RoundAborted& e) {
    CHECK(e.agent() == 0);
  }
  CHECK(start.fleet.agents[0].state == before);
  CHECK(bus.posted() == 0);
}
