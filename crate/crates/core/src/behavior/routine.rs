use rand::seq::IndexedRandom;
use rand::Rng;

use super::mapping::{MappingConfig, RoutineId};

/// Picks one routine for an emoji, uniformly among its mapped candidates.
///
/// Returns `None` for unmapped emoji; the caller decides whether to warn.
/// The draw comes from `rng`, so a fixed seed fixes the choice sequence.
pub fn select_routine<R: Rng + ?Sized>(emoji: &str, config: &MappingConfig, rng: &mut R) -> Option<RoutineId> {
    config.routines_for(emoji)?.choose(rng).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::seeded_rng;

    #[test]
    fn mapped_emoji_picks_a_member() {
        let cfg = MappingConfig::shipped();
        let mut rng = seeded_rng(7);
        for _ in 0..50 {
            let pick = select_routine("😂", &cfg, &mut rng).unwrap();
            assert!(cfg.routines_for("😂").unwrap().contains(&pick));
        }
        assert_eq!(select_routine("😡", &cfg, &mut rng).unwrap().as_str(), "anger");
    }

    #[test]
    fn unmapped_emoji_yields_nothing() {
        let cfg = MappingConfig::shipped();
        assert_eq!(select_routine("🦄", &cfg, &mut seeded_rng(1)), None);
    }

    #[test]
    fn fixed_seed_fixes_the_sequence() {
        let cfg = MappingConfig::shipped();
        let draw = |seed| {
            let mut rng = seeded_rng(seed);
            (0..20)
                .map(|_| select_routine("😊", &cfg, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        let multi = |seed| {
            let mut rng = seeded_rng(seed);
            (0..64)
                .map(|_| select_routine("🎉", &cfg, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(multi(42), multi(42));
        // both candidates of a two-routine emoji show up over 64 draws
        let picks = multi(42);
        assert!(picks.iter().any(|r| r.as_str() == "congratulations"));
        assert!(picks.iter().any(|r| r.as_str() == "happy"));
    }
}
