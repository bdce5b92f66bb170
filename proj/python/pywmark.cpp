#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "wmark/attacks.hpp"
#include "wmark/bench.hpp"
#include "wmark/detect.hpp"
#include "wmark/error.hpp"
#include "wmark/mark.hpp"
#include "wmark/raster.hpp"
#include "wmark/registry.hpp"

namespace py = pybind11;
using namespace wmark;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (H, W) gray or (H, W, 3) RGB uint8 array.
RasterImage from_array(const U8Array& a) {
  RasterImage img;
  if (a.ndim() == 2) {
    img.channels = 1;
  } else if (a.ndim() == 3 && a.shape(2) == 3) {
    img.channels = 3;
  } else {
    throw py::value_error("expected an (H, W) or (H, W, 3) uint8 array");
  }
  img.height = static_cast<int>(a.shape(0));
  img.width = static_cast<int>(a.shape(1));
  img.samples.resize(static_cast<std::size_t>(a.size()));
  std::memcpy(img.samples.data(), a.data(), img.samples.size());
  img.validate();
  return img;
}

U8Array to_array(const RasterImage& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels == 3) shape.push_back(3);
  U8Array out(shape);
  std::memcpy(out.mutable_data(), img.samples.data(), img.samples.size());
  return out;
}

EmbedParams params_for(const RasterImage& img, std::optional<double> alpha, std::optional<std::size_t> seq_len,
                       std::optional<std::size_t> skip, std::optional<std::size_t> length) {
  return ParamOverrides{alpha, seq_len, skip, length}.resolve(img.width, img.height);
}

py::dict result_dict(const DetectionResult& r) {
  py::dict d;
  d["watermarked"] = r.watermarked;
  d["message"] = r.message ? py::cast(*r.message) : py::none();
  d["flag"] = r.flag ? py::cast(*r.flag) : py::none();
  d["registered"] = r.registered;
  py::list bits;
  for (const auto& b : r.per_bit) {
    py::dict bd;
    bd["slot"] = b.slot;
    bd["z"] = b.correlation;
    bd["T"] = b.threshold;
    bd["present"] = b.present;
    bd["evaluated"] = b.evaluated;
    bits.append(bd);
  }
  d["per_bit"] = bits;
  if (r.registration) {
    d["transform"] = py::dict(py::arg("scale_x") = r.registration->scale_x, py::arg("scale_y") = r.registration->scale_y,
                              py::arg("theta_deg") = r.registration->theta_deg, py::arg("dx") = r.registration->dx,
                              py::arg("dy") = r.registration->dy);
  }
  if (r.match) d["match"] = py::dict(py::arg("imageid") = r.match->imageid, py::arg("similarity") = r.match->similarity,
                                     py::arg("confident") = r.match->confident);
  return d;
}

}  // namespace

PYBIND11_MODULE(_wmark, m) {
  m.doc() = "Spread-spectrum DCT watermarking core";

  // Messages carry the error code name as a prefix, e.g. "CapacityExceeded: ...".
  py::register_exception<Error>(m, "WatermarkError", PyExc_RuntimeError);

  m.attr("MAX_MESSAGE") = kMaxMessage;
  m.attr("DEFAULT_ALPHA") = kDefaultAlpha;

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); }, py::arg("path"));
  m.def("save_image", [](const U8Array& a, const std::filesystem::path& p) { save_image(from_array(a), p); },
        py::arg("image"), py::arg("path"));
  m.def("psnr", [](const U8Array& a, const U8Array& b) { return psnr(from_array(a), from_array(b)); });

  m.def("seed_vector", [](std::int64_t key) {
    const auto sv = derive_seed_vector(WatermarkKey(key));
    return std::vector<std::uint32_t>(sv.seeds.begin(), sv.seeds.end());
  }, py::arg("key"));
  m.def("gaussian_sequence", [](std::uint32_t seed, std::size_t n) {
    const auto v = gaussian_sequence(seed, n);
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
  }, py::arg("seed"), py::arg("n"));

  m.def("encode_payload", [](int message) {
    const PayloadCode p = encode_payload(message);
    return py::dict(py::arg("flag") = p.flag, py::arg("bits") = std::vector<bool>(p.bits.begin(), p.bits.end()),
                    py::arg("cast_set") = p.cast_set);
  }, py::arg("message"));
  m.def("decode_payload", [](const std::vector<bool>& bits) -> std::optional<std::uint16_t> {
    if (bits.size() != kSlotCount) throw py::value_error("expected 16 bits");
    std::array<bool, kSlotCount> a{};
    std::copy(bits.begin(), bits.end(), a.begin());
    return decode_payload(a);
  }, py::arg("bits"));

  m.def("default_params", [](int w, int h) {
    const EmbedParams p = default_params(w, h);
    return py::dict(py::arg("alpha") = p.alpha, py::arg("skip") = p.band.skip, py::arg("length") = p.band.length,
                    py::arg("seq_len") = p.seq_len);
  }, py::arg("width"), py::arg("height"));

  m.def("embed", [](const U8Array& a, std::int64_t key, int message, std::optional<double> alpha,
                    std::optional<std::size_t> seq_len, std::optional<std::size_t> skip,
                    std::optional<std::size_t> length) {
    const RasterImage img = from_array(a);
    const EmbedParams p = params_for(img, alpha, seq_len, skip, length);
    check_params(p, img.width, img.height);
    const Embedded e = embed(img, WatermarkKey(key), message, p);
    return py::make_tuple(to_array(e.image), e.receipt.casts);
  }, py::arg("image"), py::arg("key"), py::arg("message"), py::kw_only(), py::arg("alpha") = py::none(),
     py::arg("seq_len") = py::none(), py::arg("skip") = py::none(), py::arg("length") = py::none());

  m.def("detect", [](const U8Array& a, std::int64_t key, std::optional<double> alpha,
                     std::optional<std::size_t> seq_len, std::optional<std::size_t> skip,
                     std::optional<std::size_t> length, std::optional<std::filesystem::path> store, bool always) {
    const RasterImage img = from_array(a);
    const EmbedParams p = params_for(img, alpha, seq_len, skip, length);
    if (store) {
      const ImageStore s = ImageStore::open(*store);
      return result_dict(detect_with_registration(img, WatermarkKey(key), s, p, {},
                                                  always ? RegistrationTrigger::Always : RegistrationTrigger::OnMiss));
    }
    return result_dict(detect(img, WatermarkKey(key), p));
  }, py::arg("image"), py::arg("key"), py::kw_only(), py::arg("alpha") = py::none(), py::arg("seq_len") = py::none(),
     py::arg("skip") = py::none(), py::arg("length") = py::none(), py::arg("store") = py::none(),
     py::arg("register_always") = false);

  m.def("attack", [](const U8Array& a, const std::string& spec) {
    return to_array(apply_attack(from_array(a), parse_attack(spec)));
  }, py::arg("image"), py::arg("spec"));
  m.def("canonical_attack", [](const std::string& spec) { return format_attack(parse_attack(spec)); });

  m.def("ingest", [](const std::filesystem::path& root, const U8Array& a, std::optional<std::uint32_t> fingerprint) {
    const RasterImage img = from_array(a);
    ImageStore s = ImageStore::open_or_create(root);
    return s.ingest(img, make_supplementary(img, default_params(img.width, img.height)), fingerprint);
  }, py::arg("store"), py::arg("image"), py::arg("fingerprint") = py::none());
  m.def("query", [](const std::filesystem::path& root, const U8Array& a) -> py::object {
    const auto q = ImageStore::open(root).query(from_array(a));
    if (!q) return py::none();
    return py::dict(py::arg("imageid") = q->imageid, py::arg("similarity") = q->similarity,
                    py::arg("confident") = q->confident);
  }, py::arg("store"), py::arg("image"));
}
