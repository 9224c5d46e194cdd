#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace relkit {

struct BucketCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long samples = 0;

  double precision() const { return tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0; }
  double recall() const { return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0; }

  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }

  BucketCounts& operator+=(const BucketCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    samples += o.samples;
    return *this;
  }
};

// Micro P/R/F1 per overlap bucket, per multiplicity bucket, and overall.
// Overlap buckets are not disjoint (EPO and SEO can co-occur); multiplicity
// buckets partition the corpus.
struct MetricsReport {
  BucketCounts normal;
  BucketCounts epo;
  BucketCounts seo;
  BucketCounts single;
  BucketCounts double_;
  BucketCounts multiple;
  BucketCounts all;
};

// Tab-separated, percentages with one decimal, "-" for buckets with no
// samples.
inline std::string format_metrics_tsv(const MetricsReport& report) {
  std::ostringstream os;
  os << "Situations\tP\tR\tF1\n";
  auto emit = [&os](const char* name, const BucketCounts& b) {
    os << name;
    if (b.samples == 0) {
      os << "\t-\t-\t-\n";
      return;
    }
    os << std::fixed << std::setprecision(1);
    os << "\t" << b.precision() * 100.0 << "\t" << b.recall() * 100.0 << "\t"
       << b.f1() * 100.0 << "\n";
  };
  emit("Normal", report.normal);
  emit("EPO", report.epo);
  emit("SEO", report.seo);
  emit("Single", report.single);
  emit("Double", report.double_);
  emit("Multiple", report.multiple);
  emit("All", report.all);
  return os.str();
}

}  // namespace relkit
