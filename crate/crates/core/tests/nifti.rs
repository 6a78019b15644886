mod common;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use fimcorr::nifti::{
    self, decode_volume, encode_volume, parse_header, read_sidecar, read_volume, sidecar_path,
    voxel_to_anatomical, write_map, write_volume, Datatype, Endianness, NiftiError, NiftiHeader,
    VolumeGrid4D, VoxelMap,
};
use proptest::prelude::*;

struct Plain {
    dims: (usize, usize, usize),
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl VoxelMap for Plain {
    fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn defined(&self) -> &[bool] {
        &self.defined
    }
}

fn within_f32_ulp(original: f64, stored: f64) -> bool {
    let f = original as f32;
    let ulp = (f32::from_bits(f.abs().to_bits() + 1) - f.abs()) as f64;
    (original - stored).abs() <= ulp
}

/// Header bytes assembled field by field, independent of the library encoder.
fn handmade_header<B: ByteOrder>(dims: [i16; 4], datatype: i16, bitpix: i16, slope: f32, inter: f32) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    B::write_i32(&mut h[0..4], 348);
    B::write_i16(&mut h[40..42], 4);
    for (a, d) in dims.iter().enumerate() {
        B::write_i16(&mut h[42 + 2 * a..44 + 2 * a], *d);
    }
    for a in 5..8 {
        B::write_i16(&mut h[40 + 2 * a..42 + 2 * a], 1);
    }
    B::write_i16(&mut h[70..72], datatype);
    B::write_i16(&mut h[72..74], bitpix);
    for a in 0..8 {
        B::write_f32(&mut h[76 + 4 * a..80 + 4 * a], if a <= 4 { 2.5 } else { 0.0 });
    }
    B::write_f32(&mut h[108..112], 352.0);
    B::write_f32(&mut h[112..116], slope);
    B::write_f32(&mut h[116..120], inter);
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

#[test]
fn little_and_big_endian_fixtures_give_identical_headers() {
    let le = handmade_header::<LittleEndian>([5, 4, 3, 7], 16, 32, 0.0, 0.0);
    let be = handmade_header::<BigEndian>([5, 4, 3, 7], 16, 32, 0.0, 0.0);
    let mut a = parse_header(&le).unwrap();
    let mut b = parse_header(&be).unwrap();
    assert_eq!(a.endianness, Endianness::Little);
    assert_eq!(b.endianness, Endianness::Big);
    assert_eq!(a.dim, [4, 5, 4, 3, 7, 1, 1, 1]);
    assert_eq!(a.pixdim[1..5], [2.5; 4]);
    a.endianness = Endianness::Big;
    b.endianness = Endianness::Big;
    assert_eq!(a, b);
}

#[test]
fn int16_file_with_scaling_decodes() {
    let mut bytes = handmade_header::<BigEndian>([2, 1, 1, 3], 4, 16, 0.5, 10.0);
    for v in [0i16, 2, -4, 6, 100, 8] {
        let mut w = [0u8; 2];
        BigEndian::write_i16(&mut w, v);
        bytes.extend_from_slice(&w);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scaled.nii");
    std::fs::write(&path, &bytes).unwrap();
    let vol = read_volume(&path).unwrap();
    assert_eq!(vol.dims(), (2, 1, 1, 3));
    assert_eq!(vol.series(0, 0, 0), vec![10.0, 8.0, 60.0]);
    assert_eq!(vol.series(1, 0, 0), vec![11.0, 13.0, 14.0]);
}

#[test]
fn truncated_data_is_reported() {
    let vol = common::random_volume((3, 3, 2, 4), 9);
    let bytes = encode_volume(&vol, Endianness::Little);
    match decode_volume(&bytes[..bytes.len() - 3]) {
        Err(NiftiError::TruncatedData { expected, found }) => {
            assert_eq!(expected, 3 * 3 * 2 * 4 * 4);
            assert_eq!(found, expected - 3);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn sidecar_lists_exactly_the_undefined_voxels() {
    let dims = (4, 3, 2);
    let n = 24;
    let undefined = [(1, 0, 0), (3, 2, 1), (0, 1, 1)];
    let mut defined = vec![true; n];
    for &(i, j, k) in &undefined {
        defined[i + 4 * (j + 3 * k)] = false;
    }
    let map = Plain {
        dims,
        values: (0..n).map(|v| v as f64 / 24.0 - 0.5).collect(),
        defined,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nii");
    let template = NiftiHeader::for_grid(&[4, 3, 2, 9], Datatype::Float32);
    let sidecar = write_map(&map, &template, &path).unwrap();
    assert_eq!(sidecar, sidecar_path(&path));
    let mut listed = read_sidecar(&sidecar).unwrap();
    listed.sort();
    let mut expected = undefined.to_vec();
    expected.sort();
    assert_eq!(listed, expected);

    let back = read_volume(&path).unwrap();
    assert_eq!(back.dims(), (4, 3, 2, 1));
    for &(i, j, k) in &undefined {
        assert_eq!(back.get(i, j, k, 0), 0.0);
    }
}

#[test]
fn map_with_wrong_dims_is_rejected() {
    let map = Plain {
        dims: (2, 2, 2),
        values: vec![0.0; 8],
        defined: vec![true; 8],
    };
    let dir = tempfile::tempdir().unwrap();
    let template = NiftiHeader::for_grid(&[2, 2, 3, 5], Datatype::Float32);
    assert!(matches!(
        write_map(&map, &template, dir.path().join("x.nii")),
        Err(NiftiError::DimMismatch { .. })
    ));
}

#[test]
fn corners_follow_the_storage_convention() {
    let dims = (64, 64, 28);
    assert_eq!(
        voxel_to_anatomical((0, 0, 0), dims).unwrap(),
        "rightmost, most anterior, most superior"
    );
    assert_eq!(
        voxel_to_anatomical((63, 63, 27), dims).unwrap(),
        "leftmost, most posterior, most inferior"
    );
    assert_eq!(
        voxel_to_anatomical((23, 27, 22), dims).unwrap(),
        "23 of 63 steps from right, 27 of 63 steps from anterior, 22 of 27 steps from superior"
    );
    assert!(voxel_to_anatomical((64, 0, 0), dims).is_err());
    let vol = VolumeGrid4D::new((1, 1, 1, 1), vec![1.0]);
    assert_eq!(vol.orientation(), nifti::CONVENTION);
}

fn small_volume() -> impl Strategy<Value = VolumeGrid4D> {
    (1usize..5, 1usize..5, 1usize..4, 1usize..6).prop_flat_map(|(nx, ny, nz, nt)| {
        prop::collection::vec(
            prop_oneof![-1e6f64..1e6, -1.0f64..1.0, Just(0.0)],
            nx * ny * nz * nt,
        )
        .prop_map(move |s| VolumeGrid4D::new((nx, ny, nz, nt), s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn file_round_trip_within_one_f32_ulp(vol in small_volume()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nii");
        write_volume(&vol, &path).unwrap();
        let back = read_volume(&path).unwrap();
        prop_assert_eq!(back.dims(), vol.dims());
        for (a, b) in vol.samples().iter().zip(back.samples()) {
            prop_assert!(within_f32_ulp(*a, *b), "{} -> {}", a, b);
        }
    }

    #[test]
    fn byte_order_does_not_change_contents(vol in small_volume()) {
        let le = decode_volume(&encode_volume(&vol, Endianness::Little)).unwrap();
        let be = decode_volume(&encode_volume(&vol, Endianness::Big)).unwrap();
        prop_assert_eq!(le, be);
    }

    #[test]
    fn header_bytes_round_trip(nx in 1usize..200, ny in 1usize..200, nz in 1usize..60, nt in 1usize..400, big in any::<bool>()) {
        let mut h = NiftiHeader::for_grid(&[nx, ny, nz, nt], Datatype::Float32);
        h.endianness = if big { Endianness::Big } else { Endianness::Little };
        prop_assert_eq!(parse_header(&h.to_bytes()).unwrap(), h);
    }
}
