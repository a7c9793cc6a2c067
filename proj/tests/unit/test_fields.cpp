#include <doctest.h>

#include <cmath>
#include <limits>

#include "vol/errors.hpp"
#include "vol/fields.hpp"

using namespace vol;

TEST_CASE("field layout is channel, row, column with x fastest") {
  Field3 f(2, 3, 4);
  f.at(1, 2, 3) = 7.0;
  CHECK(f.data[(1 * 3 + 2) * 4 + 3] == 7.0);
  CHECK(*f.ptr(1, 2, 3) == 7.0);
  CHECK(f.channel(1).size() == 12);
  CHECK(f.channel(1)[11] == 7.0);

  GaussField g(3, 4, 2, 5);
  CHECK(g.quantities() == 3);
  g.q(2, 1, 1, 4) = 1.5;
  CHECK(g.at(2 * 4 + 1, 1, 4) == 1.5);
  CHECK(g.plane_ptr(2, 1)[9] == 1.5);
}

TEST_CASE("vector operations") {
  Field3 a(1, 2, 2), b(1, 2, 2);
  a.data = {1, 2, 3, 4};
  b.data = {1, -1, 0, 2};
  CHECK(dot(a, b) == 7.0);
  CHECK(norm2(a) == doctest::Approx(std::sqrt(30.0)));
  axpy(2.0, b, a);
  CHECK(a.data == std::vector<double>{3, 0, 3, 8});
  scale(a, 0.5);
  CHECK(a.data == std::vector<double>{1.5, 0, 1.5, 4});
  CHECK(all_finite(a));
  a.data[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(a));
  CHECK_THROWS_AS(dot(a, Field3(1, 2, 3)), ShapeMismatch);
}

TEST_CASE("mask, shift and relative error") {
  MaskSpec m{NodeField(1, 1, 4), NodeField(1, 1, 4)};
  m.mask.data = {0, 1, 1, 0};
  m.shift.data = {5, 0, 0, -2};
  NodeField x(1, 1, 4);
  x.data = {9, 2, 3, 9};
  CHECK(apply_mask(x, m).data == std::vector<double>{0, 2, 3, 0});
  CHECK(apply_shift_bc(x, m).data == std::vector<double>{5, 2, 3, -2});
  apply_mask_inplace(x, m);
  CHECK(x.data == std::vector<double>{0, 2, 3, 0});

  NodeField label(1, 1, 4), pred(1, 1, 4);
  label.data = {100, 3, 4, 100};
  pred.data = {0, 3, 4, 0};
  CHECK(relative_l2(pred, label, m) == 0.0);
  pred.data = {0, 0, 0, 0};
  CHECK(relative_l2(pred, label, m) == doctest::Approx(1.0));
  pred.data = {0, 3, 4 + 5, 0};
  CHECK(relative_l2(pred, label, m) == doctest::Approx(1.0));
  NodeField two(1, 1, 2), one(1, 1, 2);
  two.data = {2, 0};
  one.data = {1, 0};
  CHECK(relative_l2(two, one) == doctest::Approx(1.0));

  MaskSpec bad{NodeField(1, 1, 4), NodeField(1, 1, 4)};
  bad.mask.data = {0.5, 1, 1, 0};
  CHECK_THROWS(bad.validate());
  bad.mask.data = {1, 1, 1, 0};
  bad.shift.data = {1, 0, 0, 0};  // shift on a free entry
  CHECK_THROWS(bad.validate());
}
