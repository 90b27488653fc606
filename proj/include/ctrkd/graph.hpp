#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "ctrkd/params.hpp"
#include "ctrkd/tensor.hpp"

namespace ctrkd {

// Reverse-mode tape. A fresh tape is built for every batch; nodes hold the
// forward value and a gradient buffer of the same shape. backward() seeds the
// scalar loss with 1 and replays recorded closures in reverse, then exports
// accumulated gradients of parameter leaves into their ParamStore entries.
class Tape {
 public:
  struct Node {
    Tensor val;
    Tensor grad;
  };
  using Ref = Node*;

  // Leaves ------------------------------------------------------------
  Ref param(ParamStore& store, const std::string& name);
  Ref constant(Tensor t);
  // Tracked leaf whose gradient stays on the tape (used by tests that need
  // gradients with respect to inputs).
  Ref input(Tensor t);

  // Elementwise / structural ------------------------------------------
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);
  Ref relu(Ref x);
  Ref sigmoid(Ref x);
  Ref scale(Ref x, double c);
  Ref reshape(Ref x, std::vector<int64_t> shape);
  Ref concat_cols(const std::vector<Ref>& parts);
  Ref detach(Ref x);

  // Linear algebra ----------------------------------------------------
  Ref matmul(Ref x, Ref w);                  // [M,K]*[K,N]
  Ref dense(Ref x, Ref w, Ref b);            // matmul + row-broadcast bias
  Ref add_row_broadcast(Ref x, Ref b);       // x[M,N] + b[N]
  Ref row_scale(Ref x, Ref s);               // x[M,N] * s[M,1]

  // Embedding / sequence ----------------------------------------------
  // out[i,:] = table[idx[i],:]; backward scatters into the selected rows.
  Ref gather_rows(Ref table, std::vector<int64_t> idx);
  // [M,d] -> [M*reps,d], row i repeated into rows i*reps .. i*reps+reps-1.
  Ref tile_rows(Ref x, int64_t reps);
  // scores [B,L]; entries at l >= lens[b] are masked out. Softmax over the
  // first lens[b] entries of each row; a row with lens[b]==0 is all zeros.
  Ref masked_softmax_rows(Ref scores, std::vector<int64_t> lens);
  // Raw masked weights (softmax disabled): sigmoid of score inside the mask,
  // zero outside.
  Ref masked_sigmoid_rows(Ref scores, std::vector<int64_t> lens);
  // weights [B,L], items [B*L,d] -> [B,d]: out[b,:] = sum_l w[b,l]*e[b*L+l,:]
  Ref seq_weighted_sum(Ref weights, Ref items);

  // Losses (scalar outputs, batch mean) -------------------------------
  // Binary cross entropy against fixed 0/1 labels; p clamped to
  // [1e-7, 1-1e-7]; clamped entries get zero gradient.
  Ref bce_mean(Ref p, std::vector<double> targets);
  // Soft-target cross entropy; gradient flows into both arguments unless the
  // target was detached by the caller.
  Ref bce_mean_soft(Ref p, Ref target);
  // Mean over all elements of (a-b)^2.
  Ref mse_mean(Ref a, Ref b);
  Ref sum(Ref x);

  // -------------------------------------------------------------------
  void backward(Ref loss);

  static constexpr double kProbClamp = 1e-7;

 private:
  Ref alloc(Tensor val);

  std::deque<Node> nodes_;
  std::vector<std::function<void()>> steps_;
  struct ParamLeaf {
    Ref node;
    ParamStore::Entry* entry;
  };
  std::vector<ParamLeaf> param_leaves_;
};

// Central-difference gradient check. eval(true) must rebuild the forward
// graph from the store's current values, run backward accumulating into the
// store's gradients, and return the loss; eval(false) returns the loss only.
// Returns max over parameter elements of |analytic-numeric| normalized by
// max(1,|analytic|,|numeric|).
double grad_check(const std::function<double(bool with_grad)>& eval,
                  ParamStore& store, double eps);

}  // namespace ctrkd
