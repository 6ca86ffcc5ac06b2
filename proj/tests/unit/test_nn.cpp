#include <doctest.h>

#include "support.hpp"
#include "ungan/nn.hpp"

using namespace ungan;
using nn::LayerSpec;
using nn::Network;

namespace {

// Scalar probe loss: weighted sum of outputs, so d loss / d output = weights.
struct Probe {
  Network<double> net;
  Matrix<double> weights;
  bool training;

  double loss(const Matrix<double>& x) {
    Matrix<double> y = training ? net.forward_train(x) : net.forward(x);
    return (y.array() * weights.array()).sum();
  }
};

void check_network(Network<double> net, Eigen::Index batch, bool training, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix<double> x = gaussian_vector<double>(net.input_shape().size() * batch, rng).reshaped(net.input_shape().size(), batch);
  const Matrix<double> w = gaussian_vector<double>(net.output_size() * batch, rng).reshaped(net.output_size(), batch);
  const Vector<double> buffers = net.buffers();

  nn::Tape<double> tape;
  Matrix<double> y = training ? net.forward_train(x, &tape) : net.forward(x, &tape);
  REQUIRE(y.rows() == net.output_size());
  Vector<double> pgrad;
  Matrix<double> dx = net.backward(tape, w, &pgrad);

  Probe probe{net, w, training};
  auto input_loss = [&](const Vector<double>& v) {
    probe.net.buffers() = buffers;
    return probe.loss(v.reshaped(x.rows(), x.cols()));
  };
  const Vector<double> fd_x = testing::central_difference(input_loss, x.reshaped());
  CHECK(testing::relative_error(dx.reshaped(), fd_x) < 1e-6);

  auto param_loss = [&](const Vector<double>& p) {
    probe.net.params() = p;
    probe.net.buffers() = buffers;
    return probe.loss(x);
  };
  if (net.num_params() > 0) {
    const Vector<double> fd_p = testing::central_difference(param_loss, net.params());
    CHECK(testing::relative_error(pgrad, fd_p) < 1e-6);
  }
}

}  // namespace

TEST_CASE("layer gradients match central differences") {
  SUBCASE("linear + leaky relu + tanh") {
    Network<double> net({1, 1, 5}, {LayerSpec::linear(7), LayerSpec::leaky_relu(0.2), LayerSpec::linear(3), LayerSpec::tanh()});
    net.initialize(1);
    check_network(net, 3, false, 11);
  }
  SUBCASE("strided conv with padding") {
    Network<double> net({6, 5, 2}, {LayerSpec::conv(3, 3, 2, 1), LayerSpec::leaky_relu(0.1), LayerSpec::conv(2, 2, 1, 0)});
    net.initialize(2);
    check_network(net, 2, false, 12);
  }
  SUBCASE("transposed conv upsampling to unit range") {
    Network<double> net({3, 3, 4}, {LayerSpec::conv_transpose(3, 4, 2, 1), LayerSpec::unit_tanh()});
    REQUIRE(net.output_shape() == Shape{6, 6, 3});
    net.initialize(3);
    check_network(net, 2, false, 13);
  }
  SUBCASE("batch norm in training and inference mode") {
    Network<double> net({4, 4, 3}, {LayerSpec::conv(4, 3, 1, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
                                    LayerSpec::global_avg_pool(), LayerSpec::linear(2)});
    net.initialize(4);
    check_network(net, 4, true, 14);
    check_network(net, 4, false, 15);
  }
  SUBCASE("linear reshaped into a feature map") {
    Network<double> net({1, 1, 3}, {LayerSpec::linear(Shape{2, 2, 3}), LayerSpec::batch_norm(),
                                    LayerSpec::conv_transpose(2, 4, 2, 1), LayerSpec::clip(0.0, 1.0)});
    net.initialize(5);
    net.params().array() *= 0.3;
    check_network(net, 3, true, 16);
  }
}

TEST_CASE("conv matches a direct convolution") {
  Network<double> net({5, 4, 2}, {LayerSpec::conv(3, 3, 2, 1)});
  net.initialize(7);
  Rng rng(8);
  Vector<double> x = gaussian_vector<double>(net.input_shape().size(), rng);
  Matrix<double> y = net.forward(x);
  const Shape in = net.input_shape(), out = net.output_shape();
  const double* w = net.params().data();
  const double* b = w + 3 * 2 * 9;
  for (int oy = 0; oy < out.height; ++oy)
    for (int ox = 0; ox < out.width; ++ox)
      for (int co = 0; co < 3; ++co) {
        double acc = b[co];
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            for (int ci = 0; ci < 2; ++ci) {
              const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
              const int row = ci + 2 * (kx + 3 * ky);
              acc += w[co + 3 * row] * x[ci + 2 * (ix + in.width * iy)];
            }
        CHECK(y(co + 3 * (ox + out.width * oy), 0) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("batch norm running statistics and prefix") {
  Network<float> net({2, 2, 2}, {LayerSpec::batch_norm(), LayerSpec::relu(), LayerSpec::linear(1)});
  net.initialize(1);
  Matrix<float> x = Matrix<float>::Constant(8, 4, 3.0f);
  net.forward_train(x);
  // running mean moves 10% of the way from 0 to 3
  CHECK(net.buffers()[0] == doctest::Approx(0.3f));
  auto head = net.prefix(2);
  CHECK(head.layers().size() == 2);
  CHECK(head.num_params() == 4);
  CHECK(head.output_shape() == Shape{2, 2, 2});
}

TEST_CASE("adam descends a quadratic") {
  nn::Adam<double> adam(0.1);
  Vector<double> p = Vector<double>::Constant(3, 2.0);
  for (int i = 0; i < 500; ++i) adam.step(p, 2 * p);
  CHECK(p.norm() < 1e-2);
}

TEST_CASE("shape errors") {
  Network<float> net({2, 2, 1}, {LayerSpec::linear(3)});
  CHECK_THROWS_AS(net.forward(Matrix<float>::Zero(5, 1)), ShapeError);
  CHECK_THROWS_AS(Network<float>({2, 2, 1}, {LayerSpec::conv(1, 5, 1, 0)}), ShapeError);
}
