#include "kps/kp.hpp"

#include <cstdio>
#include <sstream>

#include "kps/error.hpp"
#include "kps/parallel.hpp"
#include "kps/tensor.hpp"

namespace kps {

namespace {

KpPoint make_point(int k, int n, ClassId dominant, ClassId topper, const std::vector<double>& probs,
                   bool never_flipped) {
  KpPoint pt;
  pt.k = k;
  pt.n = n;
  pt.dominant_class = dominant;
  pt.never_flipped = never_flipped;
  pt.p = probs[never_flipped ? dominant : topper];
  pt.p_dominant_at_k = probs[dominant];
  return pt;
}

} // namespace

KpPoint kp_point(const Model& model, const Image& image, KpStats* stats) {
  PcaBasis basis = row_pca(image);
  const int n = int(basis.r);

  std::vector<double> logits = forward(model, image);
  const ClassId dominant = argmax_class(logits);
  int forwards = 1, recon_forwards = 0;

  PrefixSweeper sweeper(basis); // starts at k = n
  int k = n;
  ClassId topper = dominant;
  std::vector<double> probs;
  while (topper == dominant && k > 0) {
    sweeper.step();
    --k;
    Image recon = sweeper.image();
    logits = forward(model, recon);
    ++forwards;
    ++recon_forwards;
    topper = argmax_class(logits);
  }
  probs = softmax(logits);
  if (stats) *stats = {forwards, recon_forwards};
  return make_point(k, n, dominant, topper, probs, topper == dominant);
}

KpPoint kp_point_bruteforce(const Model& model, const Image& image, KpStats* stats) {
  PcaBasis basis = row_pca(image);
  const int n = int(basis.r);

  const ClassId dominant = classify(model, image);
  int forwards = 1, recon_forwards = 0;

  // Every k evaluated independently; the answer is the first failure
  // scanning downward from k = n-1.
  std::vector<ClassId> toppers(n);
  std::vector<std::vector<double>> all_probs(n);
  for (int k = n - 1; k >= 0; --k) {
    Image recon = reconstruct(basis, size_t(k));
    std::vector<double> logits = forward(model, recon);
    ++forwards;
    ++recon_forwards;
    toppers[k] = argmax_class(logits);
    all_probs[k] = softmax(logits);
  }
  if (stats) *stats = {forwards, recon_forwards};

  for (int k = n - 1; k >= 0; --k) {
    if (toppers[k] != dominant)
      return make_point(k, n, dominant, toppers[k], all_probs[k], false);
  }
  return make_point(0, n, dominant, dominant, all_probs.empty() ? softmax(forward(model, image)) : all_probs[0], true);
}

std::vector<KpPoint> kp_batch(const Model& model, const std::vector<Image>& images, size_t parallelism) {
  std::vector<KpPoint> out(images.size());
  std::vector<std::string> errors(images.size());
  parallel_for(images.size(), parallelism, [&](size_t i) {
    try {
      out[i] = kp_point(model, images[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::string failures;
  for (size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      if (!failures.empty()) failures += "; ";
      failures += "item " + std::to_string(i) + ": " + errors[i];
    }
  }
  if (!failures.empty()) raise(Errc::BatchFailure, failures);
  return out;
}

const char* kKpCsvHeader = "sample_id,source,model_id,k,p,p_dominant_at_k,never_flipped,n";

std::string kp_csv_format(const std::vector<KpRecord>& records) {
  std::string out = kKpCsvHeader;
  out += '\n';
  char buf[256];
  for (const KpRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%.17g,%.17g,%d,%d\n", r.sample_id.c_str(),
                  r.source.c_str(), r.model_id.c_str(), r.point.k, r.point.p,
                  r.point.p_dominant_at_k, r.point.never_flipped ? 1 : 0, r.point.n);
    out += buf;
  }
  return out;
}

void kp_csv_write(const std::vector<KpRecord>& records, const std::string& path) {
  std::string text = kp_csv_format(records);
  write_file(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::vector<KpRecord> kp_csv_parse(const std::string& text, const std::string& context) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) raise(Errc::TruncatedFile, context + ": empty kp CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kKpCsvHeader) raise(Errc::BadMagic, context + ": unexpected kp CSV header");
  std::vector<KpRecord> records;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 8)
      raise(Errc::CountMismatch, context + " line " + std::to_string(lineno) + ": expected 8 fields");
    KpRecord r;
    r.sample_id = fields[0];
    r.source = fields[1];
    r.model_id = fields[2];
    try {
      r.point.k = std::stoi(fields[3]);
      r.point.p = std::stod(fields[4]);
      r.point.p_dominant_at_k = std::stod(fields[5]);
      r.point.never_flipped = std::stoi(fields[6]) != 0;
      r.point.n = std::stoi(fields[7]);
    } catch (const std::exception&) {
      raise(Errc::InvalidArgument, context + " line " + std::to_string(lineno) + ": bad numeric field");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<KpRecord> kp_csv_read(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  return kp_csv_parse(std::string(bytes.begin(), bytes.end()), path);
}

} // namespace kps
