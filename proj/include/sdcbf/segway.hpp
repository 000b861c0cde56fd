#ifndef SDCBF_SEGWAY_HPP
#define SDCBF_SEGWAY_HPP

#include <cmath>

#include "sdcbf/box.hpp"
#include "sdcbf/dynamics.hpp"

namespace sdcbf {

// Planar two-wheeled inverted pendulum. State x = [p, pdot, theta, thetadot]
// (wheel position in m, body pitch in rad, positive pitch = leaning forward).
// Input is a motor command; the torque acting between body and wheels is
// torque_constant * u. Positive torque accelerates the wheels forward and
// pitches the body backward.
struct SegwayParams {
  double body_mass = 44.8;       // kg
  double wheel_mass = 2.5;       // kg, both wheels
  double wheel_inertia = 0.056;  // kg m^2, both wheels about the axle
  double body_inertia = 2.0;     // kg m^2, about the body center of mass
  double com_height = 0.3;       // m, axle to body center of mass
  double wheel_radius = 0.195;   // m
  double gravity = 9.81;         // m/s^2
  double torque_constant = 1.0;  // N m per command unit
  double input_limit = 20.0;     // command units
};

class SegwayModel {
 public:
  explicit SegwayModel(SegwayParams params = {}) : params_(params) {
    const auto& q = params_;
    a_ = q.body_mass + q.wheel_mass + q.wheel_inertia / (q.wheel_radius * q.wheel_radius);
    b_ = q.body_mass * q.com_height;
    c_ = q.body_inertia + q.body_mass * q.com_height * q.com_height;
    u_max_ = Vector::Constant(1, q.input_limit);
  }

  const SegwayParams& params() const { return params_; }
  Eigen::Index state_dim() const { return 4; }
  Eigen::Index input_dim() const { return 1; }
  const Vector& input_bound() const { return u_max_; }

  // Mass matrix [[a, b cos], [b cos, c]] with
  //   a = m_body + m_wheel + J_wheel/r^2, b = m_body L, c = J_body + m_body L^2.
  template <class T>
  VecT<T> drift(const VecT<T>& x) const {
    using std::cos;
    using std::sin;
    const T& th = x[2];
    const T& w = x[3];
    const T s = sin(th);
    const T sc = T(0.5) * sin(T(2.0) * th);  // sin*cos without the dependency
    const T det = T(a_ * c_) - T(b_ * b_) * sqr(cos(th));
    const T w2 = sqr(w);
    VecT<T> f(4);
    f[0] = x[1];
    f[1] = (T(c_ * b_) * s * w2 - T(b_ * b_ * params_.gravity) * sc) / det;
    f[2] = w;
    f[3] = (T(a_ * b_ * params_.gravity) * s - T(b_ * b_) * sc * w2) / det;
    return f;
  }

  template <class T>
  MatT<T> input_matrix(const VecT<T>& x) const {
    using std::cos;
    const T& th = x[2];
    const T cth = cos(th);
    const T det = T(a_ * c_) - T(b_ * b_) * sqr(cth);
    const double r = params_.wheel_radius;
    const double kt = params_.torque_constant;
    MatT<T> g(4, 1);
    g(0, 0) = T(0.0);
    g(1, 0) = T(kt) * (T(c_ / r) + T(b_) * cth) / det;
    g(2, 0) = T(0.0);
    g(3, 0) = T(-kt) * (T(a_) + T(b_ / r) * cth) / det;
    return g;
  }

 private:
  SegwayParams params_;
  double a_ = 0.0;
  double b_ = 0.0;
  double c_ = 0.0;
  Vector u_max_;
};

}  // namespace sdcbf

#endif  // SDCBF_SEGWAY_HPP
