"""Domain records, errors and file persistence shared by the rest of the package."""
