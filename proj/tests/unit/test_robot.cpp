#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "ovmm/robot.hpp"

using namespace ovmm;

namespace {

const Scene& open_room() {
  static const Scene s = testing::make_room_scene("open", 6.0, 6.0, {{"table", {4.5, 4.5, 5.5, 5.3}, 0.75}});
  return s;
}

RobotState at(double x, double y, double yaw) {
  RobotState s;
  s.base = {x, y, yaw};
  return s;
}

}  // namespace

TEST_SUITE("robot") {
  TEST_CASE("discrete moves") {
    const Scene& s = open_room();
    const RobotState fwd = apply_discrete(at(2.0, 2.0, 0.0), {DiscreteMove::Kind::Forward}, s);
    CHECK(fwd.base.x == doctest::Approx(2.25));
    CHECK(fwd.base.y == doctest::Approx(2.0));
    CHECK_FALSE(fwd.collided);
    CHECK(fwd.step_count == 1);

    const RobotState left = apply_discrete(at(2.0, 2.0, 0.0), {DiscreteMove::Kind::TurnLeft}, s);
    CHECK(left.base.yaw == doctest::Approx(std::numbers::pi / 6));
    const RobotState right = apply_discrete(at(2.0, 2.0, 0.0), {DiscreteMove::Kind::TurnRight}, s);
    CHECK(right.base.yaw == doctest::Approx(-std::numbers::pi / 6));

    const RobotState stop = apply_discrete(at(2.0, 2.0, 0.0), {DiscreteMove::Kind::Stop}, s);
    CHECK(stop.stop_called);
  }

  TEST_CASE("forward motion into a wall is truncated and flagged") {
    const Scene& s = open_room();
    // The robot center cannot get closer than its radius plus half a wall.
    RobotState st = at(0.5, 3.0, std::numbers::pi);
    st = apply_discrete(st, {DiscreteMove::Kind::Forward}, s);
    CHECK(st.collided);
    CHECK(st.base.x > 0.25);
    CHECK(s.navigable(st.base.position()));
  }

  TEST_CASE("waypoints move in the robot frame and are capped") {
    const Scene& s = open_room();
    const RobotState st = apply_waypoint(at(2.0, 2.0, std::numbers::pi / 2), {1.0, 0.5, 0.3}, s);
    CHECK(st.base.x == doctest::Approx(1.5));
    CHECK(st.base.y == doctest::Approx(3.0));
    CHECK(st.base.yaw == doctest::Approx(std::numbers::pi / 2 + 0.3));
    CHECK_THROWS_AS(apply_waypoint(at(2.0, 2.0, 0.0), {2.5, 0.0, 0.0}, s), ActionError);
  }

  TEST_CASE("joint delta bands and mode rules") {
    const Scene& s = open_room();
    RobotState nav = at(2.0, 2.0, 0.0);
    CHECK_THROWS_AS(apply_joint_deltas(nav, {.base_forward = 0.05}, s), ActionError);
    CHECK_THROWS_AS(apply_joint_deltas(nav, {.base_forward = 0.3}, s), ActionError);
    CHECK_NOTHROW(apply_joint_deltas(nav, {.base_forward = 0.1}, s));
    CHECK_THROWS_AS(apply_joint_deltas(nav, {.lift = 0.05}, s), ActionError);
    CHECK_NOTHROW(apply_joint_deltas(nav, {}, s));

    RobotState manip = enter_manipulation_mode(nav);
    CHECK(manip.mode == RobotMode::Manipulation);
    CHECK(manip.base.yaw == doctest::Approx(std::numbers::pi / 2));
    CHECK_THROWS_AS(enter_manipulation_mode(manip), ActionError);
    CHECK_THROWS_AS(apply_joint_deltas(manip, {.base_turn = 0.2}, s), ActionError);
    CHECK_THROWS_AS(apply_discrete(manip, {DiscreteMove::Kind::Forward}, s), ActionError);
    CHECK_NOTHROW(apply_discrete(manip, {DiscreteMove::Kind::Stop}, s));
    const RobotState lifted = apply_joint_deltas(manip, {.lift = 0.1, .arm_extension = -0.05}, s);
    CHECK(lifted.joints.lift == doctest::Approx(0.7));
    CHECK(lifted.joints.arm_extension == 0.0);  // clamped at the lower limit
  }

  TEST_CASE("end effector points to the robot's right and faces the old heading after the mode turn") {
    Joints j;
    j.arm_extension = 0.3;
    const Vec3 ee = end_effector_position({1.0, 1.0, 0.0}, j);
    CHECK(ee.x == doctest::Approx(1.0));
    CHECK(ee.y == doctest::Approx(0.5));
    CHECK(ee.z == doctest::Approx(j.lift + kGripperAboveLift));
    const RobotState m = enter_manipulation_mode(at(1.0, 1.0, 0.0));
    const Vec3 turned = end_effector_position(m.base, j);
    CHECK(turned.x == doctest::Approx(1.5));
    CHECK(turned.y == doctest::Approx(1.0));
  }

  TEST_CASE("velocity controller reaches the goal pose within its limits") {
    const VelocityLimits lim;
    const double dt = 0.1;
    Pose2 pose{0.0, 0.0, 0.0};
    const Pose2 goal{2.0, 1.0, 1.0};
    VelocityCommand cmd;
    int ticks = 0;
    for (; ticks < 2000; ++ticks) {
      const VelocityCommand next = velocity_controller_step(pose, goal, lim, dt, cmd);
      CHECK(std::abs(next.v) <= lim.v_max + 1e-12);
      CHECK(std::abs(next.w) <= lim.w_max + 1e-12);
      CHECK(next.v - cmd.v <= lim.acc_lin * dt + 1e-12);
      cmd = next;
      if (cmd == VelocityCommand{}) break;
      pose = integrate_unicycle(pose, cmd, dt);
    }
    CHECK(ticks < 2000);
    CHECK(std::hypot(pose.x - goal.x, pose.y - goal.y) <= lim.position_tolerance + 1e-9);
    CHECK(std::abs(wrap_angle(pose.yaw - goal.yaw)) <= lim.yaw_tolerance + 1e-9);
    CHECK_THROWS_AS(velocity_controller_step(pose, goal, lim, 0.0), Error);
  }

  TEST_CASE("arm collision against a receptacle") {
    const Scene& s = open_room();
    Joints j;
    j.lift = 0.3;
    j.arm_extension = 0.5;
    // Robot south of the table facing west: the arm points north into the table.
    CHECK(arm_intersects_scene(s, {5.0, 3.9, std::numbers::pi}, j));
    j.lift = 0.9;
    CHECK_FALSE(arm_intersects_scene(s, {5.0, 3.9, std::numbers::pi}, j));
  }
}
