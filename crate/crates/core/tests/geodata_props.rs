use proptest::prelude::*;

use yieldcast::geodata::{
    point_in_polygon, rasterize_districts, rect_ring, zonal_mean, zonal_means, District, DistrictSet, GridHeader, Polygon, RasterGrid,
    Ring,
};

const NODATA: f64 = -9999.0;

fn header() -> impl Strategy<Value = GridHeader> {
    (1usize..25, 1usize..25, -50.0f64..50.0, -50.0f64..50.0, 0.05f64..2.0)
        .prop_map(|(c, r, x, y, s)| GridHeader::new(c, r, x, y, s, NODATA).unwrap())
}

fn grid() -> impl Strategy<Value = RasterGrid> {
    header().prop_flat_map(|h| {
        prop::collection::vec(prop_oneof![4 => -100.0f64..100.0, 1 => Just(NODATA)], h.len())
            .prop_map(move |v| RasterGrid::new(h, v).unwrap())
    })
}

/// Star-shaped ring around a point, closed.
fn ring() -> impl Strategy<Value = Ring> {
    (-60.0f64..60.0, -60.0f64..60.0, prop::collection::vec((0.0f64..std::f64::consts::TAU, 0.5f64..30.0), 3..10)).prop_map(
        |(cx, cy, mut spokes)| {
            spokes.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut r: Ring = spokes.iter().map(|(a, d)| [cx + d * a.cos(), cy + d * a.sin()]).collect();
            r.push(r[0]);
            r
        },
    )
}

fn district(name: &str, rings: Vec<Ring>) -> District {
    District { name: name.into(), state: "S".into(), polygons: vec![Polygon { rings }] }
}

proptest! {
    #[test]
    fn zonal_mean_matches_cell_scan(g in grid(), rings in prop::collection::vec(ring(), 1..5)) {
        let set = DistrictSet::new(rings.into_iter().enumerate().map(|(i, r)| district(&format!("d{i}"), vec![r])).collect()).unwrap();
        let labels = rasterize_districts(&g.header, &set);
        let all = zonal_means(&g, &labels, set.len());
        for d in 0..set.len() {
            let (mut sum, mut n) = (0.0, 0usize);
            for row in 0..g.header.nrows {
                for col in 0..g.header.ncols {
                    let c = g.header.cell_center(row, col);
                    let owner = set.districts.iter().position(|x| point_in_polygon(c, x.rings()));
                    let v = g.get(row, col);
                    if owner == Some(d) && v != NODATA {
                        sum += v;
                        n += 1;
                    }
                }
            }
            let expected = (n > 0).then(|| sum / n as f64);
            prop_assert_eq!(zonal_mean(&g, &labels, d), expected);
            prop_assert_eq!(all[d], expected);
        }
    }

    #[test]
    fn crop_mask_is_idempotent(g in grid(), seed in any::<u64>(), min_area in 0.0f64..50.0) {
        let mask_values = (0..g.header.len()).map(|i| ((seed.wrapping_mul(i as u64 + 7) >> 7) % 100) as f64).collect();
        let mask = RasterGrid::new(g.header, mask_values).unwrap();
        let once = g.apply_crop_mask(&mask, min_area).unwrap();
        let twice = once.apply_crop_mask(&mask, min_area).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn covering_polygon_gives_plain_mean(g in grid()) {
        let h = g.header;
        let ring = rect_ring(h.xll - 1.0, h.yll - 1.0, h.xll + h.ncols as f64 * h.cellsize + 1.0, h.yll + h.nrows as f64 * h.cellsize + 1.0);
        let set = DistrictSet::new(vec![district("all", vec![ring])]).unwrap();
        let labels = rasterize_districts(&h, &set);
        let valid: Vec<f64> = g.values.iter().copied().filter(|v| *v != NODATA).collect();
        let expected = (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64);
        prop_assert_eq!(zonal_mean(&g, &labels, 0), expected);
    }

    #[test]
    fn point_in_polygon_ignores_start_vertex(r in ring(), shift in 0usize..10, px in -90.0f64..90.0, py in -90.0f64..90.0) {
        let open = &r[..r.len() - 1];
        let k = shift % open.len();
        let mut rotated: Ring = open[k..].iter().chain(&open[..k]).copied().collect();
        rotated.push(rotated[0]);
        prop_assert_eq!(point_in_polygon((px, py), [&r]), point_in_polygon((px, py), [&rotated]));
    }

    #[test]
    fn ascii_grid_round_trips(g in grid()) {
        let back = RasterGrid::parse_ascii(&g.to_ascii()).unwrap();
        prop_assert_eq!(back, g);
    }
}
