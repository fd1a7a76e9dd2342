//! Score the same replies under all four reward schemes.
//!
//! ```bash
//! cargo run -p toolreward --example reward_schemes
//! ```

use toolreward::fixtures::{hair_stylist_instance, SINGLE_CALL_REPLY};
use toolreward::{score, RewardScheme};

fn main() {
    let instance = hair_stylist_instance();
    let replies = [
        ("correct", SINGLE_CALL_REPLY.to_owned()),
        (
            "wrong argument",
            SINGLE_CALL_REPLY.replace("Lafayette, LA", "Lafayette, IN"),
        ),
        (
            "wrong function",
            SINGLE_CALL_REPLY.replace(
                "\"Services_1_FindProvider\", \"arguments\"",
                "\"Services_2_Book\", \"arguments\"",
            ),
        ),
        (
            "no tags",
            r#"Sure: [{"name": "Services_1_FindProvider", "arguments": {"city": "Lafayette, LA"}}]"#.to_owned(),
        ),
    ];

    print!("{:<16}", "reply");
    for scheme in RewardScheme::ALL {
        print!("{:>26}", scheme.as_str());
    }
    println!();
    for (label, reply) in &replies {
        print!("{label:<16}");
        for scheme in RewardScheme::ALL {
            print!("{:>26}", score(&instance, reply, scheme).reward);
        }
        println!();
    }
}
