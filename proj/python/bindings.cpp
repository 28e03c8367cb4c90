#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mjnd/cam_map.hpp"
#include "mjnd/cli.hpp"
#include "mjnd/data.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/labels.hpp"
#include "mjnd/losses_oracle.hpp"
#include "mjnd/metrics.hpp"
#include "mjnd/synthetic.hpp"

namespace py = pybind11;
using namespace mjnd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

void require_shape(const py::array& a, std::initializer_list<py::ssize_t> shape, const char* what) {
  bool ok = a.ndim() == static_cast<py::ssize_t>(shape.size());
  std::size_t i = 0;
  for (auto s : shape) ok = ok && a.shape(i++) == s;
  if (!ok) throw py::value_error(std::string(what) + " has the wrong shape");
}

ImageTensor image_from(const FloatArray& a) {
  require_shape(a, {kChannels, kImageSize, kImageSize}, "image");
  ImageTensor t;
  t.values.assign(a.data(), a.data() + a.size());
  return t;
}

CamMap cam_from(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("CAM must be a 2-D array");
  CamMap c;
  c.height = static_cast<int>(a.shape(0));
  c.width = static_cast<int>(a.shape(1));
  c.values.assign(a.data(), a.data() + a.size());
  return c;
}

JndImage jnd_from(const FloatArray& a) {
  require_shape(a, {kChannels, kImageSize, kImageSize}, "noise");
  JndImage e;
  e.values.assign(a.data(), a.data() + a.size());
  return e;
}

FloatArray to_array(const std::vector<float>& v, std::vector<py::ssize_t> shape) {
  FloatArray out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core operations of the machine-perception JND pipeline";

  py::register_exception<Error>(m, "Error");

  m.def(
      "normalize",
      [](const ByteArray& hwc) {
        require_shape(hwc, {kImageSize, kImageSize, kChannels}, "image");
        PixelImage img;
        img.pixels.assign(hwc.data(), hwc.data() + hwc.size());
        return to_array(normalize(img).values, {kChannels, kImageSize, kImageSize});
      },
      py::arg("image"), "8-bit HxWx3 image to a normalized 3xHxW float array in [-1,1].");

  m.def(
      "psnr", [](const FloatArray& x, const FloatArray& y) { return psnr(image_from(x), image_from(y)); },
      py::arg("clean"), py::arg("distorted"), "PSNR in dB between two normalized 3x32x32 images.");

  m.def(
      "merge_cams",
      [](const std::vector<FloatArray>& maps) {
        std::vector<CamMap> cams;
        for (const auto& a : maps) cams.push_back(cam_from(a));
        const auto merged = merge_cams(cams);
        return to_array(merged.values, {merged.height, merged.width});
      },
      py::arg("maps"), "Pixel-wise mean of equally sized CAMs.");

  m.def(
      "assign_label",
      [](const DoubleArray& probs) {
        return assign_label(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
      },
      py::arg("probs"), "Index of the largest probability; ties go to the lowest index.");

  m.def(
      "magnitude_loss",
      [](const FloatArray& cam, const FloatArray& e, double q) {
        return oracle::magnitude_loss(cam_from(cam), jnd_from(e), q);
      },
      py::arg("cam"), py::arg("e"), py::arg("q") = kDefaultQ, "Magnitude loss of one image.");

  m.def(
      "spatial_loss",
      [](const FloatArray& cam, const FloatArray& e, bool signed_noise) {
        return oracle::spatial_loss(cam_from(cam), jnd_from(e),
                                    signed_noise ? Loss3Mode::kSigned : Loss3Mode::kMagnitude);
      },
      py::arg("cam"), py::arg("e"), py::arg("signed_noise") = false, "Spatial loss of one image.");

  m.def(
      "cross_entropy",
      [](const DoubleArray& probs, const ByteArray& refs) {
        // probs [4,B,10], refs [B,4]
        if (probs.ndim() != 3 || probs.shape(0) != kNumClassifiers || probs.shape(2) != kNumClasses) {
          throw py::value_error("probs must be [4,B,10]");
        }
        const auto batch = probs.shape(1);
        require_shape(refs, {batch, kNumClassifiers}, "refs");
        std::array<std::vector<ProbVector>, kNumClassifiers> p;
        for (int n = 0; n < kNumClassifiers; ++n) {
          for (py::ssize_t b = 0; b < batch; ++b) {
            ProbVector v;
            for (int k = 0; k < kNumClasses; ++k) v.probs[k] = probs.at(n, b, k);
            p[n].push_back(v);
          }
        }
        std::vector<LabelSet::Labels> r(static_cast<std::size_t>(batch));
        for (py::ssize_t b = 0; b < batch; ++b) {
          for (int n = 0; n < kNumClassifiers; ++n) r[b][n] = refs.at(b, n);
        }
        return oracle::cross_entropy(p, r);
      },
      py::arg("probs"), py::arg("refs"), "Mean cross-entropy of four classifiers against reference labels.");

  m.def(
      "load_split",
      [](const std::filesystem::path& root, const std::string& split, double fraction, std::uint64_t seed) {
        const auto data = load_dataset(root, parse_split(split), fraction, seed);
        const auto n = static_cast<py::ssize_t>(data.size());
        ByteArray images({n, static_cast<py::ssize_t>(kImageSize), static_cast<py::ssize_t>(kImageSize),
                          static_cast<py::ssize_t>(kChannels)});
        py::array_t<std::int64_t> labels(n);
        py::array_t<std::uint32_t> ids(n);
        auto* px = images.mutable_data();
        for (py::ssize_t i = 0; i < n; ++i) {
          const auto& r = data.records[static_cast<std::size_t>(i)];
          std::copy(r.pixels.begin(), r.pixels.end(), px + i * static_cast<py::ssize_t>(kValuesPerImage));
          labels.mutable_at(i) = r.class_index;
          ids.mutable_at(i) = r.id;
        }
        return py::make_tuple(images, labels, ids);
      },
      py::arg("root"), py::arg("split"), py::arg("fraction") = 1.0, py::arg("seed") = 0,
      "Images (N,32,32,3 uint8), class indices and record ids of a split.");

  m.def("write_synthetic_archive", &write_synthetic_archive, py::arg("root"), py::arg("seed") = 0,
        "Writes a deterministic synthetic archive in the CIFAR-10 binary format.");

  m.def(
      "dispatch",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = dispatch(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one pipeline stage; returns (exit_code, stdout, stderr).");

  m.attr("__version__") = kToolVersion;
}
