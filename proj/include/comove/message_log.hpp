#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

#include "comove/geo.hpp"

namespace comove {

struct StreamRecord {
    TimestampedPoint point;
    double ingest_time = 0.0;  // wall-clock seconds at enqueue
};

// Bounded in-process FIFO topic with independent consumer cursors. A record
// is retired once every consumer has passed it; the producer blocks (or is
// refused, non-blocking) while capacity worth of unretired records exist.
class MessageLog {
  public:
    MessageLog(std::size_t capacity, int consumers);

    bool push(StreamRecord rec, bool block);
    std::optional<StreamRecord> pop(int consumer, bool block);

    void close();           // no further pushes; blocked consumers drain out
    std::size_t lag(int consumer) const;  // produced minus consumed
    std::size_t produced() const;
    std::size_t backlog() const;          // unretired records currently held

  private:
    void retire_locked();

    mutable std::mutex mutex_;
    std::condition_variable can_push_;
    std::condition_variable can_pop_;
    std::deque<StreamRecord> buffer_;
    std::vector<std::size_t> cursor_;  // absolute per-consumer offsets
    std::size_t base_ = 0;             // absolute offset of buffer_.front()
    std::size_t produced_ = 0;
    std::size_t capacity_;
    bool closed_ = false;
};

}  // namespace comove
