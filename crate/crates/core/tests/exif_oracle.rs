use std::io::Cursor;

use capbias_core::exif::{emit_exif, format_capture_datetime};
use capbias_core::{parse_exif, ByteOrder, ExifRational, ExifRecord};
use chrono::NaiveDate;
use exif::{In, Tag, Value};
use proptest::prelude::*;

fn oracle_rational(e: &exif::Exif, tag: Tag) -> Option<(u32, u32)> {
    match &e.get_field(tag, In::PRIMARY)?.value {
        Value::Rational(v) => v.first().map(|r| (r.num, r.denom)),
        _ => None,
    }
}

fn oracle_ascii(e: &exif::Exif, tag: Tag) -> Option<String> {
    match &e.get_field(tag, In::PRIMARY)?.value {
        Value::Ascii(v) => v.first().map(|s| String::from_utf8_lossy(s).into_owned()),
        _ => None,
    }
}

fn oracle_uint(e: &exif::Exif, tag: Tag) -> Option<u32> {
    e.get_field(tag, In::PRIMARY)?.value.get_uint(0)
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ._-]{0,14}[A-Za-z0-9]"
}

fn record() -> impl Strategy<Value = ExifRecord> {
    (
        proptest::option::of((1u64..=u32::MAX as u64, 1u64..=u32::MAX as u64)),
        proptest::option::of((1u64..=u32::MAX as u64, 1u64..=u32::MAX as u64)),
        proptest::option::of(1u32..=65535),
        proptest::option::of(0u16..=9),
        proptest::option::of((1990i32..2030, 1u32..=12, 1u32..=28, 0u32..24, 0u32..60, 0u32..60)),
        proptest::option::of(text()),
        proptest::option::of(text()),
    )
        .prop_map(|(t, f, iso, prog, dt, make, model)| ExifRecord {
            exposure_time: t.map(|(n, d)| ExifRational::new(n, d).unwrap()),
            f_number: f.map(|(n, d)| ExifRational::new(n, d).unwrap()),
            iso,
            exposure_program: prog.map(|c| capbias_core::exif::exposure_program_text(c).unwrap().to_string()),
            capture_datetime: dt.map(|(y, mo, d, h, mi, s)| {
                NaiveDate::from_ymd_opt(y, mo, d).unwrap().and_hms_opt(h, mi, s).unwrap()
            }),
            make,
            model,
            byte_order: None,
            has_exif: true,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Our parser and an independent Exif reader agree on every emitted field.
    #[test]
    fn agrees_with_reference_reader(r in record(), big in any::<bool>()) {
        prop_assume!(r.exposure_time.is_some() || r.f_number.is_some() || r.iso.is_some()
            || r.exposure_program.is_some() || r.capture_datetime.is_some()
            || r.make.is_some() || r.model.is_some());
        let order = if big { ByteOrder::Big } else { ByteOrder::Little };
        let bytes = emit_exif(&r, order).unwrap();
        let ours = parse_exif(&bytes).unwrap().record;
        let theirs = exif::Reader::new().read_from_container(&mut Cursor::new(&bytes)).unwrap();

        let pair = |x: Option<ExifRational>| x.map(|v| (v.numerator() as u32, v.denominator() as u32));
        prop_assert_eq!(pair(ours.exposure_time), oracle_rational(&theirs, Tag::ExposureTime));
        prop_assert_eq!(pair(ours.f_number), oracle_rational(&theirs, Tag::FNumber));
        prop_assert_eq!(ours.iso, oracle_uint(&theirs, Tag::PhotographicSensitivity));
        prop_assert_eq!(
            ours.exposure_program.as_deref().and_then(capbias_core::exif::exposure_program_code).map(u32::from),
            oracle_uint(&theirs, Tag::ExposureProgram)
        );
        prop_assert_eq!(
            ours.capture_datetime.as_ref().map(format_capture_datetime),
            oracle_ascii(&theirs, Tag::DateTimeOriginal)
        );
        prop_assert_eq!(ours.make, oracle_ascii(&theirs, Tag::Make));
        prop_assert_eq!(ours.model, oracle_ascii(&theirs, Tag::Model));
        prop_assert_eq!(theirs.little_endian(), !big);
    }
}
