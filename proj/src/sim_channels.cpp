#include <cmath>

#include "wpt/sim.hpp"

namespace wpt::sim {

double path_loss_db(double distance_m) {
  if (!(distance_m > 0.0)) throw InvalidArgument("distance must be positive");
  return 31.7 + 27.6 * std::log10(distance_m);
}

GeometrySample draw_geometry(int num_sensors, const GeometrySpec& spec, Philox& rng) {
  if (num_sensors <= 0) throw InvalidArgument("need at least one sensor");
  if (!(spec.half_width > 0.0) || !(spec.min_distance >= 0.0) ||
      spec.min_distance >= spec.half_width)
    throw InvalidArgument("geometry requires 0 <= min_distance < half_width");
  GeometrySample g;
  g.coords.resize(num_sensors, 2);
  g.distance.resize(num_sensors);
  g.amp_factor.resize(num_sensors);
  for (int k = 0; k < num_sensors; ++k) {
    double x = 0.0, y = 0.0, d = 0.0;
    do {
      x = (2.0 * rng.next_uniform() - 1.0) * spec.half_width;
      y = (2.0 * rng.next_uniform() - 1.0) * spec.half_width;
      d = std::hypot(x, y);
    } while (d < spec.min_distance);
    g.coords(k, 0) = x;
    g.coords(k, 1) = y;
    g.distance[k] = d;
    g.amp_factor[k] = std::pow(10.0, -path_loss_db(d) / 20.0);
  }
  return g;
}

ChannelRealization draw_channels(int num_sensors, int num_fc_antennas,
                                 const GeometrySample* geometry, Philox& rng) {
  if (num_sensors <= 0 || num_fc_antennas <= 0)
    throw InvalidArgument("channel dimensions must be positive");
  if (geometry && geometry->amp_factor.size() != num_sensors)
    throw InvalidArgument("geometry does not match the sensor count");
  ChannelRealization ch;
  ch.uplink.resize(num_fc_antennas, num_sensors);
  ch.downlink.resize(num_fc_antennas, num_sensors);
  for (int k = 0; k < num_sensors; ++k) {
    const double scale = geometry ? geometry->amp_factor[k] : 1.0;
    for (int r = 0; r < num_fc_antennas; ++r) ch.uplink(r, k) = scale * rng.next_cgaussian();
  }
  for (int k = 0; k < num_sensors; ++k) {
    const double scale = geometry ? geometry->amp_factor[k] : 1.0;
    for (int r = 0; r < num_fc_antennas; ++r) ch.downlink(r, k) = scale * rng.next_cgaussian();
  }
  return ch;
}

CVec draw_harvester_channel(int num_fc_antennas, double amp_factor, Philox& rng) {
  if (num_fc_antennas <= 0) throw InvalidArgument("channel dimensions must be positive");
  CVec h(num_fc_antennas);
  for (int r = 0; r < num_fc_antennas; ++r) h[r] = amp_factor * rng.next_cgaussian();
  return h;
}

}  // namespace wpt::sim
