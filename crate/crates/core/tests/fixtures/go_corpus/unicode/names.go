package unicode

func Grüße() string { return "grüße {" }

func 世界() string {
	return "世界 }"
}

type Ωmega struct{}

func (o *Ωmega) Ändern() {}
