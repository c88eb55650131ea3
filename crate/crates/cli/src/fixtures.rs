//! Built-in scenario scripts covering common interpersonal emails.

use personamail_core::domain::{FactorSelection, TaskContext};
use personamail_core::service::{EventKind, Script};

pub struct Scenario {
    pub title: &'static str,
    pub task: &'static str,
    pub recipient: &'static str,
    /// `(factor_id, option)` pairs submitted by the script.
    pub factors: &'static [(&'static str, &'static str)],
}

impl Scenario {
    /// Lowercase, hyphen-separated form of the title.
    pub fn slug(&self) -> String {
        self.title
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == ' ' || *c == '-')
            .collect::<String>()
            .split_whitespace()
            .map(str::to_ascii_lowercase)
            .collect::<Vec<_>>()
            .join("-")
    }

    /// Create, submit, generate and finalize one session.
    pub fn script(&self) -> Script {
        let selections = self
            .factors
            .iter()
            .map(|(id, option)| FactorSelection::option(*id, *option))
            .collect();
        Script {
            steps: vec![
                EventKind::SessionCreated {
                    task: TaskContext::new(self.task).with_recipient(self.recipient),
                },
                EventKind::FactorsSubmitted {
                    selections,
                    revised_from_anchor: 0,
                },
                EventKind::GenerateRequested {},
                EventKind::Finalized {},
            ],
        }
    }
}

pub const SCENARIOS: [Scenario; 16] = [
    Scenario {
        title: "Salary Negotiation with HR",
        task: "Reply to an HR representative about a job offer and ask whether the base salary can move closer to the market rate for the role.",
        recipient: "HR representative",
        factors: &[("relationship_type", "Client / customer"), ("power_status", "Recipient somewhat senior"), ("communication_purpose", "Negotiation"), ("avoid_negative_consequence", "Avoid losing the opportunity")],
    },
    Scenario {
        title: "Mid-Level Employee Pay Raise Request",
        task: "Ask my manager for a raise after two years in the role, pointing to the projects I now lead.",
        recipient: "Direct manager",
        factors: &[("relationship_type", "Supervisor / report"), ("familiarity", "Familiar"), ("power_status", "Recipient somewhat senior"), ("communication_purpose", "Request")],
    },
    Scenario {
        title: "Project Leader Deadline Enforcement",
        task: "Remind my project team that the integration deadline is Friday and that late pieces will hold up the release.",
        recipient: "Project team",
        factors: &[("relationship_type", "Supervisor / report"), ("power_status", "Recipient junior"), ("promptness", "Urgent"), ("competing_goals", "Clarity over politeness")],
    },
    Scenario {
        title: "Correcting a Published Paper",
        task: "Tell a co-author that a table in our published article has a transcription error and propose filing a correction.",
        recipient: "Co-author",
        factors: &[("relationship_type", "Colleague"), ("power_status", "Peers"), ("communication_purpose", "Information"), ("emotional_intent", "Reassure")],
    },
    Scenario {
        title: "Addressing a Colleague's Negativity",
        task: "Raise with a teammate that their frequent criticism in meetings is discouraging the newer members of the group.",
        recipient: "Teammate",
        factors: &[("relationship_type", "Colleague"), ("familiarity", "Familiar"), ("relationship_needs", "Maintain"), ("avoid_negative_consequence", "Avoid escalation")],
    },
    Scenario {
        title: "Handling Employee Lateness",
        task: "Address repeated late arrivals with an employee and ask what support would help them arrive on time.",
        recipient: "Team member",
        factors: &[("relationship_type", "Supervisor / report"), ("power_status", "Recipient junior"), ("emotional_intent", "Express empathy"), ("competing_goals", "Balance both")],
    },
    Scenario {
        title: "Work-Life Balance Advice",
        task: "Answer a former intern who asked how I keep evenings free during busy release cycles.",
        recipient: "Former intern",
        factors: &[("relationship_type", "Mentor / mentee"), ("familiarity", "Acquainted"), ("occasion", "Informal"), ("emotional_intent", "Reassure")],
    },
    Scenario {
        title: "Mediating Team Conflict",
        task: "Write to two team members who disagree over code ownership and propose a short meeting to settle responsibilities.",
        recipient: "Two team members",
        factors: &[("relationship_type", "Supervisor / report"), ("relationship_needs", "Repair"), ("avoid_negative_consequence", "Avoid escalation"), ("occasion", "Semi-formal")],
    },
    Scenario {
        title: "Declining a Professional Dinner Invitation",
        task: "Cancel my attendance at a dinner hosted by a senior professor because a family matter came up.",
        recipient: "Professor Lin",
        factors: &[("relationship_type", "Mentor / mentee"), ("familiarity", "Familiar"), ("power_status", "Recipient much senior"), ("communication_purpose", "Rejection"), ("emotional_intent", "Minimize disappointment")],
    },
    Scenario {
        title: "Scholarship Extension Request",
        task: "Ask the scholarship office to extend my funding by one semester because my fieldwork was delayed.",
        recipient: "Scholarship office",
        factors: &[("relationship_type", "Stranger"), ("power_status", "Recipient much senior"), ("communication_purpose", "Request"), ("occasion", "Formal")],
    },
    Scenario {
        title: "Authorship Order Change Request",
        task: "Ask my advisor to reconsider the author order on our manuscript given how the analysis work was split.",
        recipient: "Advisor",
        factors: &[("relationship_type", "Mentor / mentee"), ("power_status", "Recipient much senior"), ("communication_purpose", "Negotiation"), ("avoid_negative_consequence", "Avoid damaging the relationship")],
    },
    Scenario {
        title: "Reporting TA Misconduct",
        task: "Report to the course coordinator that a teaching assistant has been sharing exam answers with some students.",
        recipient: "Course coordinator",
        factors: &[("relationship_type", "Stranger"), ("power_status", "Recipient somewhat senior"), ("communication_purpose", "Complaint"), ("promptness", "Time-sensitive")],
    },
    Scenario {
        title: "Declining Free Professional Work for a Friend",
        task: "Tell a friend I cannot design their shop logo for free, while offering a discounted rate.",
        recipient: "Friend",
        factors: &[("relationship_type", "Friend"), ("familiarity", "Very close"), ("communication_purpose", "Rejection"), ("relationship_needs", "Maintain")],
    },
    Scenario {
        title: "Setting Financial Boundaries with Family",
        task: "Explain to my cousin that I will not lend more money this year and suggest other ways I can help.",
        recipient: "Cousin",
        factors: &[("relationship_type", "Family member"), ("familiarity", "Very close"), ("competing_goals", "Clarity over politeness"), ("emotional_intent", "Express empathy")],
    },
    Scenario {
        title: "Roommate Cleanliness Discussion",
        task: "Ask my roommate to agree on a cleaning schedule for the kitchen and shared bathroom.",
        recipient: "Roommate",
        factors: &[("relationship_type", "Friend"), ("power_status", "Peers"), ("occasion", "Informal"), ("avoid_negative_consequence", "Avoid offense")],
    },
    Scenario {
        title: "Discussing Future Differences with a Partner",
        task: "Start a conversation with my partner about where each of us wants to live in five years.",
        recipient: "Partner",
        factors: &[("relationship_type", "Family member"), ("familiarity", "Very close"), ("relationship_needs", "Strengthen"), ("emotional_intent", "Reassure")],
    },
];

/// Find a scenario by slug or by title, ignoring case.
pub fn find(name: &str) -> Option<&'static Scenario> {
    let wanted = name.trim().to_ascii_lowercase();
    SCENARIOS
        .iter()
        .find(|s| s.slug() == wanted || s.title.to_ascii_lowercase() == wanted)
}
