#pragma once

// Glue between datasets, the series composer and the network.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "calfront/composer.hpp"
#include "calfront/dataset.hpp"
#include "calfront/net.hpp"

namespace calfront::pipeline {

struct SeriesOptions {
  composer::SeriesPolicy policy = composer::SeriesPolicy::consecutive();
  bool rock_mask = false;
  // When the summer-reference policy cannot be satisfied (no frames in a reference month) use a
  // consecutive window of the same length instead of failing.
  bool fallback_consecutive = false;
};

/// One composed series around an anchor frame, in dataset indices.
struct SeriesSample {
  std::size_t anchor = 0;           // dataset index
  std::vector<std::size_t> frames;  // dataset indices, series order
  std::vector<bool> retain;
  int anchor_pos = 0;               // position of the anchor inside the series
  bool fell_back = false;
};

/// Composes the series for one frame from the frames of the same glacier. The anchor is never
/// used as its own summer reference.
SeriesSample compose_for(const Dataset& ds, std::size_t frame, const SeriesOptions& options);

/// Rock mask of a glacier as stored in the dataset; DataError when absent.
const Grid<std::uint8_t>& rock_mask_for(const Dataset& ds, const std::string& glacier_id);

/// L x C x H x W input tensor (C = 2 when `rock_mask`).
net::Tensor series_tensor(const Dataset& ds, const SeriesSample& sample, bool rock_mask);

/// Zone labels of every frame of the series.
std::vector<ZoneMap> series_labels(const Dataset& ds, const SeriesSample& sample);

/// Shifts every frame and label by `dx` columns (positive moves content right). Vacated columns
/// become NA: zero in every input channel and label NA.
void shift_columns(net::Tensor& series, std::vector<ZoneMap>& labels, int dx);

/// 1 x K x H x W logits of the anchor frame.
net::Tensor anchor_logits(const net::Tensor& logits, int anchor_pos);

/// Anchor logits for every label-matched frame (or every frame when `label_matched_only` is false),
/// keyed by frame id.
std::map<std::string, net::Tensor> predict_logits(net::Network& network, const Dataset& ds, const SeriesOptions& options,
                                                  bool label_matched_only = true);

/// Argmax zone maps from predict_logits.
std::map<std::string, ZoneMap> predict_zones(net::Network& network, const Dataset& ds, const SeriesOptions& options,
                                             bool label_matched_only = true);

/// Unweighted mean over the 4 classes of the per-class IoU (each averaged over the images where the
/// class is defined). Classes undefined on every image are skipped.
double mean_class_iou(const std::map<std::string, ZoneMap>& predictions, const Dataset& ds);

}  // namespace calfront::pipeline
