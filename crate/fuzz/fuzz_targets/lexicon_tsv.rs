#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::lexicon::AffectLexicon;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lex) = AffectLexicon::parse_vad_tsv(text, false) {
        for (_, e) in lex.sorted_entries() {
            assert!((0.0..=1.0).contains(&e.arousal) && (0.0..=1.0).contains(&e.valence));
        }
    }
    let _ = AffectLexicon::parse_vad_tsv(text, true);
});
