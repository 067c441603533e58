//! Multi-scale deformable attention: each query predicts a small set of
//! sampling offsets around its per-level reference point and attends only
//! to those bilinearly-sampled locations.

use super::attention::softmax_slice;
use super::{KernelError, Tensor};

/// Bilinear interpolation of an `H x W x d` feature map at real-valued
/// grid coordinates `(x, y)`, `x` along the width axis.
///
/// The four surrounding integer cells are blended; cells falling outside
/// `[0, W-1] x [0, H-1]` contribute zeros, so the function is total.
pub fn bilinear_sample(map: &Tensor, x: f64, y: f64) -> Vec<f64> {
    assert_eq!(map.rank(), 3, "bilinear_sample expects an H x W x d map");
    let (h, w, d) = (map.shape()[0], map.shape()[1], map.shape()[2]);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut out = vec![0.0; d];
    let corners = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1.0, y0, fx * (1.0 - fy)),
        (x0, y0 + 1.0, (1.0 - fx) * fy),
        (x0 + 1.0, y0 + 1.0, fx * fy),
    ];
    for (cx, cy, weight) in corners {
        if weight == 0.0 || cx < 0.0 || cy < 0.0 || cx > (w - 1) as f64 || cy > (h - 1) as f64 {
            continue;
        }
        let (ci, cj) = (cy as usize, cx as usize);
        for ch in 0..d {
            out[ch] += weight * map.at3(ci, cj, ch);
        }
    }
    out
}

/// Parameters for multi-scale deformable attention.
///
/// Layouts are fixed so traces are reproducible: the offset projection
/// produces `h * L * K * 2` values ordered `[head][level][point][x, y]`,
/// the weight projection produces `h * L * K` logits ordered
/// `[head][level][point]`, and each head reads its contiguous channel
/// slice of the projected values (`d_model / h` channels per head).
#[derive(Debug, Clone)]
pub struct MsdaParams {
    pub num_heads: usize,
    pub num_levels: usize,
    pub num_points: usize,
    pub value_proj: Tensor,
    pub offset_proj: Tensor,
    pub offset_bias: Vec<f64>,
    pub weight_proj: Tensor,
    pub weight_bias: Vec<f64>,
    pub output_proj: Tensor,
}

impl MsdaParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_heads: usize,
        num_levels: usize,
        num_points: usize,
        value_proj: Tensor,
        offset_proj: Tensor,
        offset_bias: Vec<f64>,
        weight_proj: Tensor,
        weight_bias: Vec<f64>,
        output_proj: Tensor,
    ) -> Result<Self, KernelError> {
        if num_heads * num_levels * num_points == 0 {
            return Err(KernelError::InvalidParameter {
                name: "num_heads/num_levels/num_points",
                message: "h, L and K must all be positive".into(),
            });
        }
        if value_proj.rank() != 2 || value_proj.rows() != value_proj.cols() {
            return Err(KernelError::ShapeMismatch {
                context: "value projection",
                expected: "square d_model x d_model".into(),
                actual: format!("{:?}", value_proj.shape()),
            });
        }
        let d_model = value_proj.rows();
        if d_model % num_heads != 0 {
            return Err(KernelError::InvalidParameter {
                name: "num_heads",
                message: format!("d_model {d_model} not divisible by {num_heads} heads"),
            });
        }
        let hlk = num_heads * num_levels * num_points;
        let checks = [
            (&offset_proj, offset_bias.len(), 2 * hlk, "offset projection"),
            (&weight_proj, weight_bias.len(), hlk, "weight projection"),
        ];
        for (proj, bias_len, want, context) in checks {
            if proj.rank() != 2 || proj.rows() != d_model || proj.cols() != want {
                return Err(KernelError::ShapeMismatch {
                    context,
                    expected: format!("{d_model} x {want}"),
                    actual: format!("{:?}", proj.shape()),
                });
            }
            if bias_len != want {
                return Err(KernelError::ShapeMismatch {
                    context,
                    expected: format!("bias len {want}"),
                    actual: format!("bias len {bias_len}"),
                });
            }
        }
        if output_proj.rank() != 2 || output_proj.rows() != d_model || output_proj.cols() != d_model
        {
            return Err(KernelError::ShapeMismatch {
                context: "output projection",
                expected: format!("{d_model} x {d_model}"),
                actual: format!("{:?}", output_proj.shape()),
            });
        }
        Ok(Self {
            num_heads,
            num_levels,
            num_points,
            value_proj,
            offset_proj,
            offset_bias,
            weight_proj,
            weight_bias,
            output_proj,
        })
    }

    pub fn d_model(&self) -> usize {
        self.value_proj.rows()
    }
}

/// Multi-scale deformable attention.
///
/// * `query`: `n x d_model`.
/// * `ref_points`: per query, one normalized `(x, y)` in `[0, 1]^2` per
///   level; a reference maps onto level `l` as `(x * (W_l - 1), y * (H_l - 1))`.
/// * `value_maps`: `L` feature maps, each `H_l x W_l x d_model`.
///
/// Per query and head, `L * K` offset locations are sampled from the
/// value-projected maps and combined with softmax weights normalized
/// jointly across all `L * K` points of that head; offsets are in absolute
/// grid units; out-of-map samples read as zero.
pub fn ms_deform_attention(
    query: &Tensor,
    ref_points: &[Vec<(f64, f64)>],
    value_maps: &[Tensor],
    params: &MsdaParams,
) -> Result<Tensor, KernelError> {
    let d_model = params.d_model();
    if query.rank() != 2 || query.cols() != d_model {
        return Err(KernelError::ShapeMismatch {
            context: "msda query",
            expected: format!("n x {d_model}"),
            actual: format!("{:?}", query.shape()),
        });
    }
    if value_maps.len() != params.num_levels {
        return Err(KernelError::ShapeMismatch {
            context: "msda level count",
            expected: format!("{}", params.num_levels),
            actual: format!("{}", value_maps.len()),
        });
    }
    for (l, map) in value_maps.iter().enumerate() {
        if map.rank() != 3 || map.shape()[2] != d_model {
            return Err(KernelError::ShapeMismatch {
                context: "msda value map",
                expected: format!("H x W x {d_model}"),
                actual: format!("level {l}: {:?}", map.shape()),
            });
        }
    }
    let n = query.rows();
    if ref_points.len() != n || ref_points.iter().any(|r| r.len() != params.num_levels) {
        return Err(KernelError::ShapeMismatch {
            context: "msda reference points",
            expected: format!("{n} queries x {} levels", params.num_levels),
            actual: format!(
                "{} queries x {:?} levels",
                ref_points.len(),
                ref_points.iter().map(|r| r.len()).collect::<Vec<_>>()
            ),
        });
    }

    // Project every value map once per call.
    let projected: Vec<Tensor> = value_maps
        .iter()
        .map(|map| {
            let (h, w) = (map.shape()[0], map.shape()[1]);
            let flat = Tensor::new([h * w, d_model], map.as_slice().to_vec())?;
            let proj = flat.matmul(&params.value_proj)?;
            Tensor::new([h, w, d_model], proj.as_slice().to_vec())
        })
        .collect::<Result<_, _>>()?;

    let (heads, levels, points) = (params.num_heads, params.num_levels, params.num_points);
    let d_head = d_model / heads;
    let offsets = query
        .matmul(&params.offset_proj)?
        .add_row_bias(&params.offset_bias)?;
    let logits = query
        .matmul(&params.weight_proj)?
        .add_row_bias(&params.weight_bias)?;

    let mut concat = Tensor::zeros([n, d_model]);
    for qi in 0..n {
        for head in 0..heads {
            let logit_base = head * levels * points;
            let weights = softmax_slice(&logits.row(qi)[logit_base..logit_base + levels * points]);
            let mut acc = vec![0.0; d_head];
            for level in 0..levels {
                let map = &projected[level];
                let (map_h, map_w) = (map.shape()[0], map.shape()[1]);
                let (rx, ry) = ref_points[qi][level];
                for point in 0..points {
                    let flat = (head * levels + level) * points + point;
                    let ox = offsets.at2(qi, 2 * flat);
                    let oy = offsets.at2(qi, 2 * flat + 1);
                    let sx = rx * (map_w - 1) as f64 + ox;
                    let sy = ry * (map_h - 1) as f64 + oy;
                    let sample = bilinear_sample(map, sx, sy);
                    let weight = weights[level * points + point];
                    for ch in 0..d_head {
                        acc[ch] += weight * sample[head * d_head + ch];
                    }
                }
            }
            for ch in 0..d_head {
                concat.set2(qi, head * d_head + ch, acc[ch]);
            }
        }
    }
    concat.matmul(&params.output_proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(vals: &[&[f64]]) -> Tensor {
        // Scalar-channel map (d = 1) from nested rows.
        let h = vals.len();
        let w = vals[0].len();
        let mut t = Tensor::zeros([h, w, 1]);
        for (i, row) in vals.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t.set3(i, j, 0, v);
            }
        }
        t
    }

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros([n, n]);
        for i in 0..n {
            t.set2(i, i, 1.0);
        }
        t
    }

    #[test]
    fn integer_coordinates_return_exact_grid_values() {
        let map = map_from(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[5.0, 6.0, 7.0, 8.0],
            &[9.0, 10.0, 11.0, 12.0],
            &[13.0, 14.0, 15.0, 16.0],
        ]);
        assert_eq!(bilinear_sample(&map, 2.0, 3.0), vec![15.0]);
        assert_eq!(bilinear_sample(&map, 0.0, 0.0), vec![1.0]);
    }

    #[test]
    fn center_of_two_by_two_map_averages_all_four() {
        let map = map_from(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let got = bilinear_sample(&map, 0.5, 0.5);
        assert!((got[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn fractional_sample_matches_hand_expanded_weights() {
        let map = map_from(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        // (x, y) = (1.25, 0.75): corners (1,0)=2, (2,0)=3, (1,1)=5, (2,1)=6
        // weights 0.75*0.25, 0.25*0.25, 0.75*0.75, 0.25*0.75.
        let expected = 2.0 * 0.1875 + 3.0 * 0.0625 + 5.0 * 0.5625 + 6.0 * 0.1875;
        let got = bilinear_sample(&map, 1.25, 0.75);
        assert!((got[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn outside_coordinates_fade_to_zero_padding() {
        let map = map_from(&[&[8.0]]);
        assert_eq!(bilinear_sample(&map, -1.0, 0.0), vec![0.0]);
        assert_eq!(bilinear_sample(&map, 5.0, 5.0), vec![0.0]);
        // Half-in sample: x = -0.5 blends the edge value with zero padding.
        let got = bilinear_sample(&map, -0.5, 0.0);
        assert!((got[0] - 4.0).abs() < 1e-15);
    }

    fn single_point_params(d: usize) -> MsdaParams {
        MsdaParams::new(
            1,
            1,
            1,
            identity(d),
            Tensor::zeros([d, 2]),
            vec![0.0, 0.0],
            Tensor::zeros([d, 1]),
            vec![0.0],
            identity(d),
        )
        .unwrap()
    }

    #[test]
    fn zero_offset_single_point_identity_equals_bilinear_sample() {
        let d = 3;
        let mut map = Tensor::zeros([4, 5, d]);
        let mut rng = crate::rng::SplitMix64::new(33);
        for v in map.as_mut_slice() {
            *v = rng.next_symmetric();
        }
        let params = single_point_params(d);
        let query = Tensor::new([1, d], vec![0.3, -0.8, 0.1]).unwrap();
        let refs = vec![vec![(0.35, 0.7)]];
        let out = ms_deform_attention(&query, &refs, &[map.clone()], &params).unwrap();
        let direct = bilinear_sample(&map, 0.35 * 4.0, 0.7 * 3.0);
        for (a, b) in out.row(0).iter().zip(direct) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn equal_logits_average_four_integer_reference_samples() {
        // L = 1, K = 4, zero offsets, weight projection zero (uniform
        // weights), identity value/output projections, query centered on an
        // integer grid point so all four samples coincide per point.
        let d = 2;
        let mut map = Tensor::zeros([3, 3, d]);
        for i in 0..3 {
            for j in 0..3 {
                map.set3(i, j, 0, (i * 3 + j) as f64);
                map.set3(i, j, 1, 10.0 + (i * 3 + j) as f64);
            }
        }
        let params = MsdaParams::new(
            1,
            1,
            4,
            identity(d),
            Tensor::zeros([d, 8]),
            // Four distinct zero-offsets would all sample the same spot;
            // instead bias the offsets to land on four integer corners.
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            Tensor::zeros([d, 4]),
            vec![0.0; 4],
            identity(d),
        )
        .unwrap();
        let query = Tensor::zeros([1, d]);
        let refs = vec![vec![(0.0, 0.0)]];
        let out = ms_deform_attention(&query, &refs, &[map.clone()], &params).unwrap();
        // Sampled corners: (0,0), (1,0), (0,1), (1,1) -> channel 0 values 0, 1, 3, 4.
        let expected0 = (0.0 + 1.0 + 3.0 + 4.0) / 4.0;
        assert!((out.at2(0, 0) - expected0).abs() < 1e-12);
        let expected1 = (10.0 + 11.0 + 13.0 + 14.0) / 4.0;
        assert!((out.at2(0, 1) - expected1).abs() < 1e-12);
    }

    #[test]
    fn reference_point_count_mismatch_is_a_shape_error() {
        let params = single_point_params(2);
        let query = Tensor::zeros([2, 2]);
        let refs = vec![vec![(0.5, 0.5)]]; // only one query's references
        let maps = [Tensor::zeros([2, 2, 2])];
        assert!(ms_deform_attention(&query, &refs, &maps, &params).is_err());
    }
}
