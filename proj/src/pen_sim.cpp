#include <algorithm>
#include <cmath>
#include <numbers>

#include "horde/environments.hpp"
#include "horde/error.hpp"

namespace horde {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double light_x = 1.7, light_y = 1.7;
constexpr double heat_x = 0.3, heat_y = 0.4;
constexpr std::array<std::array<double, 2>, 4> lamps{{{0.5, 0.5}, {1.5, 0.5}, {0.5, 1.5}, {1.5, 1.5}}};
constexpr std::array<double, 3> wheel_angles{0.0, two_pi / 3.0, 2.0 * two_pi / 3.0};

double wrap_angle(double a) {
  a = std::fmod(a, two_pi);
  return a < 0.0 ? a + two_pi : a;
}

// (-π, π]
double signed_angle(double a) {
  a = wrap_angle(a);
  return a > pi ? a - two_pi : a;
}

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

double ray_to_wall(double x, double y, double angle, double size) {
  const double cx = std::cos(angle);
  const double cy = std::sin(angle);
  double d = std::numeric_limits<double>::infinity();
  if (cx > 1e-12) d = std::min(d, (size - x) / cx);
  if (cx < -1e-12) d = std::min(d, -x / cx);
  if (cy > 1e-12) d = std::min(d, (size - y) / cy);
  if (cy < -1e-12) d = std::min(d, -y / cy);
  return std::max(d, 0.0);
}

double floor_pattern(double px, double py) {
  return 0.5 + 0.5 * std::sin(1.3 * pi * px) * std::cos(1.1 * pi * py);
}

}  // namespace

PenSimEnv::PenSimEnv(PenSimConfig cfg) : cfg_(cfg), pose_(cfg.start), rng_(cfg.seed) {
  if (!(cfg_.size > 0.0)) throw ConfigError("pen size must be positive");
  if (!(cfg_.noise >= 0.0)) throw ConfigError("sensor noise must be non-negative");
  pose_.x = std::clamp(pose_.x, 0.0, cfg_.size);
  pose_.y = std::clamp(pose_.y, 0.0, cfg_.size);
  pose_.heading = wrap_angle(pose_.heading);
  wheel_temp_.fill(0.2);
  wheel_current_.fill(0.1);
  sense();
}

std::span<const double> PenSimEnv::step(Action action) {
  double v = 0.0;  // normalised translational command
  double w = 0.0;  // normalised rotational command
  switch (action) {
    case robot_action::forward: v = 1.0; break;
    case robot_action::reverse: v = -1.0; break;
    case robot_action::rotate_cw: w = -1.0; break;
    case robot_action::rotate_ccw: w = 1.0; break;
    case robot_action::stop: break;
    default: throw ConfigError("pen: unknown action " + std::to_string(action));
  }

  pose_.heading = wrap_angle(pose_.heading + w * cfg_.angular_rate);
  const double dx = v * cfg_.forward_speed * std::cos(pose_.heading);
  const double dy = v * cfg_.forward_speed * std::sin(pose_.heading);
  const double nx = std::clamp(pose_.x + dx, 0.0, cfg_.size);
  const double ny = std::clamp(pose_.y + dy, 0.0, cfg_.size);
  const double commanded = std::hypot(dx, dy);
  const double moved = commanded > 0.0 ? std::hypot(nx - pose_.x, ny - pose_.y) / commanded : 1.0;
  pose_.x = nx;
  pose_.y = ny;

  double current_sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double translate = 0.6 * v * std::cos(wheel_angles[k] + pi / 6.0);
    wheel_cmd_[k] = translate + 0.4 * w;
    const double delivered = translate * moved + 0.4 * w;
    wheel_speed_[k] += 0.4 * (delivered - wheel_speed_[k]);
    wheel_current_[k] = clip01(0.1 + 0.3 * std::abs(wheel_cmd_[k]) + 0.6 * std::abs(wheel_cmd_[k] - wheel_speed_[k]));
    wheel_temp_[k] += (wheel_current_[k] - wheel_temp_[k]) / 30.0;
    current_sum += wheel_current_[k];
  }
  const double sag = 0.95 - 0.4 * current_sum / 3.0;
  battery_fast_ += (sag - battery_fast_) / 5.0;
  battery_slow_ += (sag - battery_slow_) / 40.0;

  const double old_speed = body_speed_;
  body_speed_ += 0.5 * (v * moved - body_speed_);
  accel_ = body_speed_ - old_speed;
  body_turn_ += 0.5 * (w - body_turn_);

  sense();
  return obs_;
}

void PenSimEnv::sense() {
  const double x = pose_.x, y = pose_.y, h = pose_.heading, size = cfg_.size;
  std::size_t i = 0;

  for (int k = 0; k < 8; ++k) obs_[i++] = std::exp(-ray_to_wall(x, y, h + k * pi / 4.0, size) / 0.4);

  const double light_bearing = std::atan2(light_y - y, light_x - x);
  const double light_r2 = (light_x - x) * (light_x - x) + (light_y - y) * (light_y - y);
  for (int k = 0; k < 8; ++k) {
    obs_[i++] = (0.5 + 0.5 * std::cos(light_bearing - (h + k * pi / 4.0))) / (1.0 + light_r2 / 2.0);
  }

  const double heat_bearing = std::atan2(heat_y - y, heat_x - x);
  const double heat_r = std::hypot(heat_x - x, heat_y - y);
  for (int k = 0; k < 4; ++k) {
    obs_[i++] = (0.5 + 0.5 * std::cos(heat_bearing - (h + k * pi / 2.0))) * std::exp(-heat_r);
  }

  for (int k = 0; k < 4; ++k) {
    const double a = h + k * pi / 2.0;
    obs_[i++] = floor_pattern(std::clamp(x + 0.15 * std::cos(a), 0.0, size), std::clamp(y + 0.15 * std::sin(a), 0.0, size));
  }

  obs_[i++] = 0.5 + 0.5 * std::cos(h);
  obs_[i++] = 0.5 + 0.5 * std::sin(h);
  obs_[i++] = 0.5 + 0.5 * std::cos(h - two_pi / 3.0);

  obs_[i++] = 0.5 + 0.5 * accel_;
  obs_[i++] = 0.5 + 0.5 * body_speed_ * body_turn_;
  obs_[i++] = 0.5 + 0.5 * body_turn_;

  for (double s : wheel_speed_) obs_[i++] = 0.5 + 0.5 * s;
  for (double c : wheel_current_) obs_[i++] = c;
  for (double t : wheel_temp_) obs_[i++] = t;
  for (double c : wheel_cmd_) obs_[i++] = 0.5 + 0.45 * c;

  obs_[i++] = battery_fast_;
  obs_[i++] = battery_slow_;

  obs_[i++] = (size - y) / size;
  obs_[i++] = (size - x) / size;
  obs_[i++] = y / size;
  obs_[i++] = x / size;

  for (const auto& lamp : lamps) {
    const double r2 = (lamp[0] - x) * (lamp[0] - x) + (lamp[1] - y) * (lamp[1] - y);
    obs_[i++] = std::exp(-r2 / 0.5);
  }

  obs_[i++] = std::abs(body_speed_);

  if (cfg_.noise > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg_.noise);
    for (auto& o : obs_) o += noise(rng_);
  }
  for (auto& o : obs_) o = clip01(o);
}

Action PenSimEnv::recenter_action() const noexcept {
  const double cx = cfg_.size / 2.0 - pose_.x;
  const double cy = cfg_.size / 2.0 - pose_.y;
  if (std::hypot(cx, cy) < cfg_.forward_speed) return robot_action::stop;
  const double err = signed_angle(std::atan2(cy, cx) - pose_.heading);
  if (std::abs(err) > cfg_.angular_rate / 2.0) return err > 0.0 ? robot_action::rotate_ccw : robot_action::rotate_cw;
  return robot_action::forward;
}

const std::array<std::string_view, PenSimEnv::sensor_count>& PenSimEnv::sensor_names() {
  static const std::array<std::string_view, sensor_count> names{
      "ir_0",        "ir_45",       "ir_90",       "ir_135",      "ir_180",      "ir_225",      "ir_270",
      "ir_315",      "light_0",     "light_45",    "light_90",    "light_135",   "light_180",   "light_225",
      "light_270",   "light_315",   "heat_front",  "heat_left",   "heat_back",   "heat_right",  "floor_front",
      "floor_left",  "floor_back",  "floor_right", "mag_x",       "mag_y",       "mag_z",       "accel_long",
      "accel_lat",   "gyro",        "wheel0_vel",  "wheel1_vel",  "wheel2_vel",  "wheel0_amp",  "wheel1_amp",
      "wheel2_amp",  "wheel0_temp", "wheel1_temp", "wheel2_temp", "wheel0_volt", "wheel1_volt", "wheel2_volt",
      "battery_a",   "battery_b",   "wall_north",  "wall_east",   "wall_south",  "wall_west",   "lamp_sw",
      "lamp_se",     "lamp_nw",     "lamp_ne",     "speed"};
  return names;
}

}  // namespace horde
